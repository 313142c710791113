//! Deterministic random streams.
//!
//! Every stochastic routine takes a `u64` seed. Work items never share a
//! generator: each gets a ChaCha8 stream addressed by `(seed, domain, index)`,
//! so results do not depend on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream domains keep unrelated uses of the same user seed apart.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum Domain {
    Couplings = 1,
    EdgeLists = 2,
    QuenchedStratum = 3,
    QuenchedMc = 4,
    PdAtoms = 5,
    Stability = 6,
    CavityInteraction = 7,
    CavityReaction = 8,
    SumRule = 9,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for work item `index` within `domain`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> Rng {
    let key = splitmix64(seed ^ splitmix64(domain as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Derive a child seed, for handing a sub-computation its own seed space.
pub fn child_seed(seed: u64, domain: Domain, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(domain as u64)) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}
