#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

//! Numerics for the antiferromagnetic q-state Potts model on the Poissonian
//! Erdős–Rényi graph: exact small-N quenched pressures, the closed-form
//! annealed curves and phase boundaries, replica-symmetric and cascade upper
//! bounds, and the constrained second-moment functional.

pub mod bounds;
pub mod cascade;
pub mod disorder;
pub mod error;
pub mod model;
pub mod numeric;
pub mod replica_symmetric;
pub mod rng;
pub mod second_moment;

pub use bounds::ExtReal;
pub use error::{Error, Result};
pub use model::{CouplingMatrix, EnumBudget, ModelParams, ReplicaBundle, SpinConfig};
