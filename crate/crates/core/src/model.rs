//! Potts-model primitives at small N by exhaustive enumeration.
//!
//! Colors are 0-based throughout (`0..q`). Configurations are visited in
//! mixed-radix counting order and the energy is updated incrementally from
//! the rows and columns of the sites that changed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bounds::ExtReal;
use crate::error::{invalid, Error, Result};
use crate::numeric::LogSumExp;

/// Color count, inverse temperature and mean connectivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub q: usize,
    pub beta: ExtReal,
    pub c: f64,
}

impl ModelParams {
    pub fn new(q: usize, beta: impl Into<ExtReal>, c: f64) -> Result<Self> {
        let beta = beta.into();
        if q < 2 {
            return Err(invalid(format!("q must be at least 2, got {q}")));
        }
        if let ExtReal::Finite(b) = beta {
            if !(b >= 0.0) {
                return Err(invalid(format!("beta must be nonnegative, got {b}")));
            }
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(invalid(format!("c must be finite and nonnegative, got {c}")));
        }
        Ok(Self { q, beta, c })
    }

    /// The inverse temperature, rejecting beta = inf for `op`.
    pub fn finite_beta(&self, op: &'static str) -> Result<f64> {
        self.beta.finite().ok_or(Error::InfiniteBeta(op))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinConfig {
    spins: Vec<u8>,
}

impl SpinConfig {
    pub fn new(spins: Vec<usize>, q: usize) -> Result<Self> {
        if spins.is_empty() {
            return Err(invalid("spin configuration must have at least one site"));
        }
        if q > u8::MAX as usize {
            return Err(invalid(format!("q = {q} too large")));
        }
        if let Some(&bad) = spins.iter().find(|&&s| s >= q) {
            return Err(invalid(format!("color {bad} out of range for q = {q}")));
        }
        Ok(Self { spins: spins.into_iter().map(|s| s as u8).collect() })
    }

    pub(crate) fn from_raw(spins: Vec<u8>) -> Self {
        Self { spins }
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn get(&self, i: usize) -> usize {
        self.spins[i] as usize
    }

    pub fn spins(&self) -> &[u8] {
        &self.spins
    }
}

/// Square matrix of nonnegative integer couplings J_ij.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    n: usize,
    entries: Vec<u32>,
}

impl CouplingMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, entries: vec![0; n * n] }
    }

    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(invalid("coupling matrix must be at least 1x1"));
        }
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            entries.extend_from_slice(row);
        }
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u32) {
        self.entries[i * self.n + j] = v;
    }

    pub fn add(&mut self, i: usize, j: usize) {
        self.entries[i * self.n + j] += 1;
    }

    /// |J| = sum of all entries.
    pub fn total(&self) -> u64 {
        self.entries.iter().map(|&v| v as u64).sum()
    }

    /// Symmetrized off-diagonal weight J_ij + J_ji.
    fn sym(&self, i: usize, j: usize) -> i64 {
        self.get(i, j) as i64 + self.get(j, i) as i64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicaBundle {
    replicas: Vec<SpinConfig>,
}

impl ReplicaBundle {
    pub fn new(replicas: Vec<SpinConfig>) -> Result<Self> {
        let Some(first) = replicas.first() else {
            return Err(invalid("a replica bundle needs at least one replica"));
        };
        let n = first.len();
        if let Some(bad) = replicas.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: bad.len() });
        }
        Ok(Self { replicas })
    }

    pub fn replicas(&self) -> &[SpinConfig] {
        &self.replicas
    }

    pub fn n(&self) -> usize {
        self.replicas[0].len()
    }

    pub fn r(&self) -> usize {
        self.replicas.len()
    }
}

/// Upper bound on the number of enumerated terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumBudget {
    pub max_terms: f64,
}

impl Default for EnumBudget {
    /// Admits N <= 14 at q = 2 and N <= 9 at q = 3.
    fn default() -> Self {
        Self { max_terms: 20_000.0 }
    }
}

impl EnumBudget {
    pub fn check(&self, terms: f64) -> Result<()> {
        if terms > self.max_terms {
            Err(Error::BudgetExceeded { needed: terms, limit: self.max_terms })
        } else {
            Ok(())
        }
    }
}

pub fn hamiltonian(sigma: &SpinConfig, j: &CouplingMatrix) -> Result<f64> {
    let n = j.n();
    if sigma.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: sigma.len() });
    }
    let mut e: u64 = 0;
    for a in 0..n {
        for b in 0..n {
            if sigma.spins[a] == sigma.spins[b] {
                e += j.get(a, b) as u64;
            }
        }
    }
    Ok(e as f64)
}

/// Visit all q^N configurations with their energies.
pub(crate) fn for_each_config(j: &CouplingMatrix, q: usize, mut f: impl FnMut(&[u8], u64)) {
    let n = j.n();
    let mut spins = vec![0u8; n];
    // All sites share color 0: every coupling is active.
    let mut energy = j.total() as i64;
    loop {
        f(&spins, energy as u64);
        let mut site = 0;
        loop {
            if site == n {
                return;
            }
            let old = spins[site];
            let new = if old as usize + 1 == q { 0 } else { old + 1 };
            let mut delta = 0i64;
            for other in 0..n {
                if other == site {
                    continue;
                }
                let w = j.sym(site, other);
                if w == 0 {
                    continue;
                }
                let s = spins[other];
                if s == new {
                    delta += w;
                }
                if s == old {
                    delta -= w;
                }
            }
            spins[site] = new;
            energy += delta;
            if new != 0 {
                break;
            }
            site += 1;
        }
    }
}

/// Density of states: number of configurations at each energy.
#[derive(Debug, Clone)]
pub struct EnergySpectrum {
    n: usize,
    levels: Vec<(u64, f64)>,
}

impl EnergySpectrum {
    pub fn compute(j: &CouplingMatrix, q: usize, budget: EnumBudget) -> Result<Self> {
        budget.check((q as f64).powi(j.n() as i32))?;
        let mut hist: BTreeMap<u64, f64> = BTreeMap::new();
        for_each_config(j, q, |_, e| *hist.entry(e).or_insert(0.0) += 1.0);
        Ok(Self { n: j.n(), levels: hist.into_iter().collect() })
    }

    pub fn log_partition(&self, beta: f64) -> f64 {
        let mut acc = LogSumExp::default();
        for &(e, count) in &self.levels {
            acc.push(count.ln() - beta * e as f64);
        }
        acc.value()
    }

    pub fn mean_energy(&self, beta: f64) -> f64 {
        let lz = self.log_partition(beta);
        self.levels.iter().map(|&(e, count)| e as f64 * (count.ln() - beta * e as f64 - lz).exp()).sum()
    }

    /// Gibbs entropy per site; beta = inf gives the uniform measure on ground states.
    pub fn entropy_density(&self, beta: ExtReal) -> f64 {
        let n = self.n as f64;
        match beta {
            ExtReal::Infinite => self.levels[0].1.ln() / n,
            ExtReal::Finite(b) => {
                let lz = self.log_partition(b);
                let s: f64 = self
                    .levels
                    .iter()
                    .map(|&(e, count)| {
                        let neg_ln_w = (b * e as f64 + lz).max(0.0);
                        count * (-neg_ln_w).exp() * neg_ln_w
                    })
                    .sum();
                s / n
            }
        }
    }
}

fn finite(beta: f64, op: &'static str) -> Result<f64> {
    if beta.is_infinite() {
        return Err(Error::InfiniteBeta(op));
    }
    if !(beta >= 0.0) {
        return Err(invalid(format!("beta must be nonnegative, got {beta}")));
    }
    Ok(beta)
}

pub fn log_partition(j: &CouplingMatrix, q: usize, beta: f64) -> Result<f64> {
    log_partition_with(j, q, beta, EnumBudget::default())
}

pub fn log_partition_with(j: &CouplingMatrix, q: usize, beta: f64, budget: EnumBudget) -> Result<f64> {
    let beta = finite(beta, "log_partition")?;
    Ok(EnergySpectrum::compute(j, q, budget)?.log_partition(beta))
}

pub fn pressure_density(j: &CouplingMatrix, q: usize, beta: f64) -> Result<f64> {
    Ok(log_partition(j, q, beta)? / j.n() as f64)
}

pub fn entropy_density(j: &CouplingMatrix, q: usize, beta: ExtReal) -> Result<f64> {
    if let ExtReal::Finite(b) = beta {
        finite(b, "entropy_density")?;
    }
    Ok(EnergySpectrum::compute(j, q, EnumBudget::default())?.entropy_density(beta))
}

/// rho(s) = N^{-1} sum_i prod_r delta(sigma_i^(r), s_r).
pub fn empirical_measure(bundle: &ReplicaBundle, s: &[usize]) -> Result<f64> {
    if s.len() != bundle.r() {
        return Err(Error::DimensionMismatch { expected: bundle.r(), got: s.len() });
    }
    let n = bundle.n();
    let hits = (0..n).filter(|&i| bundle.replicas.iter().zip(s).all(|(rep, &c)| rep.get(i) == c)).count();
    Ok(hits as f64 / n as f64)
}

/// Expectation of `f` under the R-fold product Gibbs measure, by enumerating
/// all q^{NR} replica tuples.
pub fn gibbs_replica_expectation(
    j: &CouplingMatrix,
    q: usize,
    beta: f64,
    r: usize,
    f: &dyn Fn(&ReplicaBundle) -> f64,
    budget: EnumBudget,
) -> Result<f64> {
    let beta = finite(beta, "gibbs_replica_expectation")?;
    if r == 0 {
        return Err(invalid("R must be at least 1"));
    }
    let n = j.n();
    budget.check((q as f64).powi((n * r) as i32))?;
    let mut configs = Vec::new();
    let mut lnw = Vec::new();
    for_each_config(j, q, |s, e| {
        configs.push(s.to_vec());
        lnw.push(-beta * e as f64);
    });
    let lz = crate::numeric::log_sum_exp(lnw.iter().copied());
    let probs: Vec<f64> = lnw.iter().map(|w| (w - lz).exp()).collect();
    let m = configs.len();
    let mut idx = vec![0usize; r];
    let mut total = 0.0;
    loop {
        let weight: f64 = idx.iter().map(|&k| probs[k]).product();
        if weight > 0.0 {
            let bundle =
                ReplicaBundle { replicas: idx.iter().map(|&k| SpinConfig::from_raw(configs[k].clone())).collect() };
            total += weight * f(&bundle);
        }
        let mut pos = 0;
        loop {
            if pos == r {
                return Ok(total);
            }
            idx[pos] += 1;
            if idx[pos] < m {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spins(v: &[usize], q: usize) -> SpinConfig {
        SpinConfig::new(v.to_vec(), q).unwrap()
    }

    #[test]
    fn hamiltonian_examples() {
        let z = CouplingMatrix::zeros(3);
        assert_eq!(hamiltonian(&spins(&[0, 1, 0], 2), &z).unwrap(), 0.0);
        let j = CouplingMatrix::from_rows(&[vec![2]]).unwrap();
        assert_eq!(hamiltonian(&spins(&[0], 2), &j).unwrap(), 2.0);
        let j = CouplingMatrix::from_rows(&[vec![0, 1], vec![0, 0]]).unwrap();
        assert_eq!(hamiltonian(&spins(&[0, 0], 2), &j).unwrap(), 1.0);
        assert_eq!(hamiltonian(&spins(&[0, 1], 2), &j).unwrap(), 0.0);
        assert!(matches!(hamiltonian(&spins(&[0], 2), &j), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn incremental_energies_match_direct_evaluation() {
        let j = CouplingMatrix::from_rows(&[vec![1, 2, 0, 1], vec![0, 0, 3, 0], vec![1, 0, 2, 1], vec![0, 1, 0, 0]])
            .unwrap();
        let mut seen = 0;
        for_each_config(&j, 3, |s, e| {
            let direct = hamiltonian(&SpinConfig::from_raw(s.to_vec()), &j).unwrap();
            assert_eq!(direct, e as f64);
            seen += 1;
        });
        assert_eq!(seen, 81);
    }

    #[test]
    fn log_partition_examples() {
        let j = CouplingMatrix::from_rows(&[vec![0, 1, 0], vec![0, 0, 1], vec![1, 0, 0]]).unwrap();
        assert!((log_partition(&j, 3, 0.0).unwrap() - 3.0 * 3f64.ln()).abs() < 1e-12);
        let j1 = CouplingMatrix::from_rows(&[vec![4]]).unwrap();
        assert!((log_partition(&j1, 3, 0.7).unwrap() - (3f64.ln() - 0.7 * 4.0)).abs() < 1e-12);
        let j2 = CouplingMatrix::from_rows(&[vec![0, 1], vec![0, 0]]).unwrap();
        assert!((log_partition(&j2, 2, 2f64.ln()).unwrap() - 3f64.ln()).abs() < 1e-12);
        assert!(matches!(log_partition(&j2, 2, f64::INFINITY), Err(Error::InfiniteBeta(_))));
    }

    #[test]
    fn budget_is_enforced() {
        let j = CouplingMatrix::zeros(15);
        assert!(matches!(log_partition(&j, 2, 1.0), Err(Error::BudgetExceeded { .. })));
        assert!(log_partition(&CouplingMatrix::zeros(14), 2, 1.0).is_ok());
        assert!(log_partition(&CouplingMatrix::zeros(9), 3, 1.0).is_ok());
    }

    #[test]
    fn pressure_density_examples() {
        let j1 = CouplingMatrix::from_rows(&[vec![1]]).unwrap();
        assert!((pressure_density(&j1, 2, 1.0).unwrap() - (2f64.ln() - 1.0)).abs() < 1e-12);
        let z = CouplingMatrix::zeros(4);
        assert!((pressure_density(&z, 3, 2.5).unwrap() - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_examples() {
        let j = CouplingMatrix::from_rows(&[vec![0, 2, 1], vec![0, 1, 0], vec![1, 0, 0]]).unwrap();
        assert!((entropy_density(&j, 3, ExtReal::Finite(0.0)).unwrap() - 3f64.ln()).abs() < 1e-12);
        // Path 0-1, 0-2 at q = 2: proper colorings are (a, b, b) with a != b.
        let path = CouplingMatrix::from_rows(&[vec![0, 1, 1], vec![0, 0, 0], vec![0, 0, 0]]).unwrap();
        let s = entropy_density(&path, 2, ExtReal::Infinite).unwrap();
        assert!((s - 2f64.ln() / 3.0).abs() < 1e-12);
        let large_beta = entropy_density(&path, 2, ExtReal::Finite(60.0)).unwrap();
        assert!((large_beta - s).abs() < 1e-12);
        for k in 0..4 {
            let j1 = CouplingMatrix::from_rows(&[vec![k]]).unwrap();
            for &b in &[0.0, 0.5, 3.0] {
                let s = entropy_density(&j1, 4, ExtReal::Finite(b)).unwrap();
                assert!((s - 4f64.ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empirical_measure_examples() {
        let b = ReplicaBundle::new(vec![spins(&[0, 0, 0], 2)]).unwrap();
        assert_eq!(empirical_measure(&b, &[0]).unwrap(), 1.0);
        assert_eq!(empirical_measure(&b, &[1]).unwrap(), 0.0);
        let b = ReplicaBundle::new(vec![spins(&[0, 1], 2)]).unwrap();
        assert_eq!(empirical_measure(&b, &[0]).unwrap(), 0.5);
        assert_eq!(empirical_measure(&b, &[1]).unwrap(), 0.5);
        let b = ReplicaBundle::new(vec![spins(&[0, 2, 1], 3), spins(&[0, 2, 1], 3)]).unwrap();
        for a in 0..3 {
            for c in 0..3 {
                if a != c {
                    assert_eq!(empirical_measure(&b, &[a, c]).unwrap(), 0.0);
                }
            }
        }
        assert!(empirical_measure(&b, &[0]).is_err());
    }

    #[test]
    fn replica_expectation_examples() {
        let j = CouplingMatrix::from_rows(&[vec![0, 1, 0], vec![0, 0, 1], vec![0, 0, 1]]).unwrap();
        let one = gibbs_replica_expectation(&j, 2, 0.8, 2, &|_| 1.0, EnumBudget::default()).unwrap();
        assert!((one - 1.0).abs() < 1e-12);
        let z = CouplingMatrix::zeros(3);
        let f = |b: &ReplicaBundle| (b.replicas()[0].get(0) == b.replicas()[0].get(2)) as u8 as f64;
        let v = gibbs_replica_expectation(&z, 3, 0.0, 1, &f, EnumBudget::default()).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
        let z1 = CouplingMatrix::zeros(1);
        let agree = |b: &ReplicaBundle| (0..3).map(|s| empirical_measure(b, &[s, s]).unwrap()).sum();
        let v = gibbs_replica_expectation(&z1, 3, 0.0, 2, &agree, EnumBudget::default()).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }
}
