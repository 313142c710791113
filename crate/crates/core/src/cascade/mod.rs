//! Poisson-Dirichlet atoms, the stability property of Poisson point
//! processes under i.i.d. multipliers, Ruelle cascades of depth at most 3,
//! and cavity functionals whose difference bounds the quenched pressure.

mod cavity;

use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numeric::{ks_critical_constant, ks_two_sample, log_sum_exp};
use crate::rng::{stream, Domain, Rng};

pub use cavity::{cavity_g1, cavity_g2, rsb_upper_bound, Estimator};

/// One cascade level parameter, or a limit endpoint resolved to its exact form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Level {
    /// m -> 0 at the first level: (1/m) ln E[X^m] becomes E[ln X].
    ToZero,
    Value(f64),
    /// m -> 1 at the last level: the innermost fractional moment becomes E[X].
    ToOne,
}

impl Level {
    /// The power-mean order, with the endpoints at 0 and 1.
    pub fn order(self) -> f64 {
        match self {
            Level::ToZero => 0.0,
            Level::Value(m) => m,
            Level::ToOne => 1.0,
        }
    }
}

/// Depth L in {1, 2, 3} and increasing parameters 0 < m_1 < ... < m_L < 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeSpec {
    levels: Vec<Level>,
}

impl CascadeSpec {
    pub fn new(levels: Vec<Level>) -> Result<Self> {
        let depth = levels.len();
        if !(1..=3).contains(&depth) {
            return Err(invalid(format!("cascade depth must be 1, 2 or 3, got {depth}")));
        }
        for (i, lv) in levels.iter().enumerate() {
            match *lv {
                Level::ToZero if i != 0 => return Err(invalid("m -> 0 is only allowed at the first level")),
                Level::ToOne if i != depth - 1 => return Err(invalid("m -> 1 is only allowed at the last level")),
                Level::Value(m) if !(m > 0.0 && m < 1.0) => {
                    return Err(invalid(format!("level parameter {m} outside (0, 1)")))
                }
                _ => {}
            }
        }
        if depth == 1 && levels[0] == Level::ToZero {
            return Err(invalid("a single level cannot take m -> 0"));
        }
        if levels.windows(2).any(|w| w[0].order() >= w[1].order()) {
            return Err(invalid("level parameters must be strictly increasing"));
        }
        Ok(Self { levels })
    }

    /// The replica-symmetric pair of limits (m_1 -> 0, m_2 -> 1).
    pub fn replica_symmetric() -> Self {
        Self { levels: vec![Level::ToZero, Level::ToOne] }
    }

    /// Single level with m -> 1, which reproduces the annealed pressure.
    pub fn annealed() -> Self {
        Self { levels: vec![Level::ToOne] }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Hierarchy {
    /// Every level uniform: spins carry no center information.
    Uniform,
    /// Each coordinate draws a uniform center S at depth L-1 and the leaf
    /// spin from t delta(r, S) + (1 - t)/q; shallower levels are trivial.
    SymmetricT { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinHierarchySpec {
    pub kind: Hierarchy,
    pub q: usize,
}

impl SpinHierarchySpec {
    pub fn new(kind: Hierarchy, q: usize) -> Result<Self> {
        if q < 2 {
            return Err(invalid(format!("q must be at least 2, got {q}")));
        }
        if let Hierarchy::SymmetricT { t } = kind {
            let lo = -1.0 / (q as f64 - 1.0);
            if !(t >= lo && t <= 1.0) {
                return Err(invalid(format!("t = {t} outside [{lo}, 1]")));
            }
        }
        Ok(Self { kind, q })
    }
}

/// Descending atoms of a Poisson process with intensity m x^{-m-1} dx.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomSet {
    pub atoms: Vec<f64>,
    /// E[sum of the atoms beyond the last one | last arrival time].
    pub tail_mass_bound: f64,
}

/// ln-atoms -ln(Gamma_k)/m and the conditional residual mass, from arrival
/// times of a unit-rate Poisson process.
pub(crate) fn pd_log_atoms(m: f64, n: usize, rng: &mut Rng) -> (Vec<f64>, f64) {
    let mut gamma = 0.0;
    let mut ln_atoms = Vec::with_capacity(n);
    for _ in 0..n {
        let e: f64 = Exp1.sample(rng);
        gamma += e;
        ln_atoms.push(-gamma.ln() / m);
    }
    let tail = m / (1.0 - m) * gamma.powf((m - 1.0) / m);
    (ln_atoms, tail)
}

fn check_m(m: f64) -> Result<()> {
    if !(m > 0.0 && m < 1.0) {
        return Err(invalid(format!("m must lie in (0, 1), got {m}")));
    }
    Ok(())
}

pub fn sample_pd_atoms_with(m: f64, n_atoms: usize, rng: &mut Rng) -> Result<AtomSet> {
    check_m(m)?;
    if n_atoms == 0 {
        return Err(invalid("n_atoms must be at least 1"));
    }
    let (ln_atoms, tail) = pd_log_atoms(m, n_atoms, rng);
    Ok(AtomSet { atoms: ln_atoms.into_iter().map(f64::exp).collect(), tail_mass_bound: tail })
}

/// Atoms xi_k = Gamma_k^{-1/m} from stream 0 of `seed`.
pub fn sample_pd_atoms(m: f64, n_atoms: usize, seed: u64) -> Result<AtomSet> {
    sample_pd_atoms_with(m, n_atoms, &mut stream(seed, Domain::PdAtoms, 0))
}

pub const DEFAULT_ATOMS: usize = 4096;

/// Multiplier law for the stability test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Multiplier {
    /// Log-normal with unit log-variance, E[X^m] = e^{m^2/2}.
    LogNormal,
    /// X = 1 identically.
    One,
}

impl Multiplier {
    /// (E[X^m])^{1/m}.
    pub fn scale(self, m: f64) -> f64 {
        match self {
            Multiplier::LogNormal => (0.5 * m).exp(),
            Multiplier::One => 1.0,
        }
    }
}

pub const STABILITY_RANKS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub scale: f64,
    /// Two-sample KS statistic for each of the top ranks, on log scale.
    pub statistics: Vec<f64>,
    /// Critical value per rank after splitting alpha across the ranks.
    pub critical: f64,
    pub alpha: f64,
    pub passed: bool,
}

/// Compares the top atoms of {X_k xi_k} with those of {c xi_k},
/// c = (E[X^m])^{1/m}, rank by rank, using independent atom draws per side.
/// `scale_error` multiplies c (1 for the honest test).
pub fn stability_test_with(
    m: f64,
    n_atoms: usize,
    draws: usize,
    seed: u64,
    multiplier: Multiplier,
    scale_error: f64,
    alpha: f64,
) -> Result<StabilityReport> {
    check_m(m)?;
    if draws < 2 || n_atoms < STABILITY_RANKS {
        return Err(invalid(format!("degenerate sample sizes: draws = {draws}, n_atoms = {n_atoms}")));
    }
    let scale = multiplier.scale(m) * scale_error;
    let pairs: Vec<([f64; STABILITY_RANKS], [f64; STABILITY_RANKS])> = (0..draws as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Domain::Stability, 2 * i);
            let (ln_xi, _) = pd_log_atoms(m, n_atoms, &mut rng);
            let mut mixed: Vec<f64> = ln_xi
                .iter()
                .map(|&l| match multiplier {
                    Multiplier::LogNormal => {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        l + z
                    }
                    Multiplier::One => l,
                })
                .collect();
            mixed.sort_by(|a, b| b.total_cmp(a));
            let mut rng2 = stream(seed, Domain::Stability, 2 * i + 1);
            let (ln_ref, _) = pd_log_atoms(m, STABILITY_RANKS, &mut rng2);
            let mut left = [0.0; STABILITY_RANKS];
            let mut right = [0.0; STABILITY_RANKS];
            for r in 0..STABILITY_RANKS {
                left[r] = mixed[r];
                right[r] = ln_ref[r] + scale.ln();
            }
            (left, right)
        })
        .collect();
    let n = draws as f64;
    let critical = ks_critical_constant(alpha / STABILITY_RANKS as f64) * (2.0 / n).sqrt();
    let statistics: Vec<f64> = (0..STABILITY_RANKS)
        .map(|r| {
            let a: Vec<f64> = pairs.iter().map(|p| p.0[r]).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1[r]).collect();
            ks_two_sample(&a, &b)
        })
        .collect();
    let passed = statistics.iter().all(|&d| d <= critical);
    Ok(StabilityReport { scale, statistics, critical, alpha, passed })
}

pub fn stability_test(m: f64, n_atoms: usize, draws: usize, seed: u64) -> Result<StabilityReport> {
    stability_test_with(m, n_atoms, draws, seed, Multiplier::LogNormal, 1.0, 1e-3)
}

/// ln Z of a realized cascade normalizer over truncated atoms, with the
/// estimated contribution of the atoms beyond the truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizerSample {
    pub ln_z: f64,
    pub tail_estimate: f64,
}

/// Z = sum_{a_1} xi_{a_1} sum_{a_2} xi_{a_1 a_2} ... with `n_atoms` atoms per
/// node; child j of a node always uses the same stream, so growing `n_atoms`
/// extends the same realization.
pub fn cascade_normalizer(ms: &[f64], n_atoms: usize, seed: u64) -> Result<NormalizerSample> {
    if ms.is_empty() || ms.len() > 3 {
        return Err(invalid("between 1 and 3 levels required"));
    }
    for &m in ms {
        check_m(m)?;
    }
    if ms.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("level parameters must be strictly increasing"));
    }
    fn node(ms: &[f64], n: usize, seed: u64, path: u64) -> (f64, f64) {
        let mut rng = stream(seed, Domain::PdAtoms, path);
        let (ln_xi, tail) = pd_log_atoms(ms[0], n, &mut rng);
        if ms.len() == 1 {
            return (log_sum_exp(ln_xi.iter().copied()), tail);
        }
        let children: Vec<(f64, f64)> =
            (0..n as u64).map(|j| node(&ms[1..], n, seed, path.wrapping_mul(0x1_0000).wrapping_add(j + 1))).collect();
        let ln_z = log_sum_exp(ln_xi.iter().zip(&children).map(|(l, c)| l + c.0));
        let mean_child = (log_sum_exp(children.iter().map(|c| c.0)) - (n as f64).ln()).exp();
        let inner: f64 = ln_xi.iter().zip(&children).map(|(l, c)| l.exp() * c.1).sum();
        (ln_z, tail * mean_child + inner)
    }
    let (ln_z, tail_estimate) = node(ms, n_atoms, seed, 0);
    Ok(NormalizerSample { ln_z, tail_estimate })
}
