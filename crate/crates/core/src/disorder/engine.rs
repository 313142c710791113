//! Averages of graph functionals over Poisson multigraphs on unordered pairs.
//!
//! Self-loops never change Gibbs weights, so everything a quenched average
//! needs is the multigraph on the P = N(N-1)/2 unordered pairs. By Poisson
//! thinning its edge count M is Poisson(lambda) and, given M, the edges are
//! i.i.d. uniform over pairs. The average over M splits into
//!
//! * M <= exact_edges: enumeration of every multiset of M pairs with its
//!   multinomial probability,
//! * exact_edges < M <= max_edges: stratified Monte Carlo, one pre-seeded
//!   stream per stratum,
//! * M > max_edges: a certified interval supplied by the functional.
//!
//! Spin states fix site 0 to color 0; functionals must be invariant under
//! global color relabelings.

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::{poisson_pmf, poisson_tail};
use crate::rng::{stream, Domain};

pub(crate) struct PairSystem {
    pub n: usize,
    pub states: usize,
    pub pairs: usize,
    /// cols[p * states + s] = 1 iff pair p is monochromatic in state s.
    pub cols: Vec<u8>,
}

impl PairSystem {
    pub fn new(n: usize, q: usize) -> Self {
        let states = q.pow((n - 1) as u32);
        let pair_list: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let pairs = pair_list.len();
        let mut cols = vec![0u8; pairs * states];
        let mut spins = vec![0usize; n];
        for s in 0..states {
            let mut rem = s;
            for spin in spins.iter_mut().skip(1) {
                *spin = rem % q;
                rem /= q;
            }
            for (p, &(i, j)) in pair_list.iter().enumerate() {
                cols[p * states + s] = (spins[i] == spins[j]) as u8;
            }
        }
        Self { n, states, pairs, cols }
    }

    fn col(&self, p: usize) -> &[u8] {
        &self.cols[p * self.states..(p + 1) * self.states]
    }
}

/// A bounded functional of the pair multigraph, seen through the number of
/// monochromatic edges in each spin state.
pub(crate) trait PairFunctional: Sync {
    fn eval(&self, sys: &PairSystem, energies: &[u32]) -> f64;

    /// Relative cost of one evaluation, in units of `states`.
    fn cost(&self, sys: &PairSystem) -> f64 {
        let _ = sys;
        1.0
    }

    /// For M ~ Poisson(lambda) restricted to M > max_edges: returns
    /// (sum of pi_M * center_M, sum of pi_M * halfwidth_M) where every value
    /// at M lies within center_M +- halfwidth_M.
    fn tail(&self, sys: &PairSystem, lambda: f64, max_edges: u64) -> (f64, f64);
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct EngineOptions {
    pub work_budget: f64,
    pub mc_samples: usize,
    pub min_stratum_samples: usize,
    pub max_edges_limit: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct EngineOutput {
    pub mean: f64,
    pub variance: f64,
    pub tail_bound: f64,
    pub samples: usize,
    pub exact_edges: u64,
    pub max_edges: u64,
}

fn multisets_up_to(pairs: usize, m: u64) -> f64 {
    // C(pairs + m, m) nodes in the enumeration tree, including the root.
    let mut v = 1.0;
    for k in 1..=m {
        v = v * (pairs as f64 + k as f64) / k as f64;
    }
    v
}

/// Exact E[F | M] for M = 0..=max_m, by depth-first enumeration of multisets.
fn exact_layer<F: PairFunctional>(sys: &PairSystem, f: &F, max_m: u64) -> Vec<f64> {
    let max_m = max_m as usize;
    let mut out = vec![0.0; max_m + 1];
    let zero = vec![0u32; sys.states];
    out[0] = f.eval(sys, &zero);
    if max_m == 0 || sys.pairs == 0 {
        return out;
    }
    let p_inv = 1.0 / sys.pairs as f64;
    let partials: Vec<Vec<f64>> = (0..sys.pairs)
        .into_par_iter()
        .map(|first| {
            let mut acc = vec![0.0; max_m + 1];
            let mut energies = zero.clone();
            let mut mult = vec![0u32; sys.pairs];
            add(&mut energies, sys.col(first));
            mult[first] = 1;
            let w = p_inv;
            acc[1] += w * f.eval(sys, &energies);
            if max_m > 1 {
                descend(sys, f, first, 1, w, max_m, &mut energies, &mut mult, &mut acc);
            }
            acc
        })
        .collect();
    for part in partials {
        for (o, v) in out.iter_mut().zip(part).skip(1) {
            *o += v;
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn descend<F: PairFunctional>(
    sys: &PairSystem,
    f: &F,
    start: usize,
    depth: usize,
    weight: f64,
    max_m: usize,
    energies: &mut [u32],
    mult: &mut [u32],
    acc: &mut [f64],
) {
    let p_inv = 1.0 / sys.pairs as f64;
    for p in start..sys.pairs {
        let w = weight * (depth + 1) as f64 / (mult[p] + 1) as f64 * p_inv;
        add(energies, sys.col(p));
        mult[p] += 1;
        acc[depth + 1] += w * f.eval(sys, energies);
        if depth + 1 < max_m {
            descend(sys, f, p, depth + 1, w, max_m, energies, mult, acc);
        }
        mult[p] -= 1;
        sub(energies, sys.col(p));
    }
}

fn add(e: &mut [u32], col: &[u8]) {
    for (x, &d) in e.iter_mut().zip(col) {
        *x += d as u32;
    }
}

fn sub(e: &mut [u32], col: &[u8]) {
    for (x, &d) in e.iter_mut().zip(col) {
        *x -= d as u32;
    }
}

/// Monte Carlo mean and sample variance of F given M edges.
fn stratum<F: PairFunctional>(sys: &PairSystem, f: &F, m: u64, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = stream(seed, Domain::QuenchedStratum, m);
    let mut energies = vec![0u32; sys.states];
    let mut values = Vec::with_capacity(samples);
    for _ in 0..samples {
        energies.fill(0);
        for _ in 0..m {
            let p = rng.random_range(0..sys.pairs);
            add(&mut energies, sys.col(p));
        }
        values.push(f.eval(sys, &energies));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var)
}

/// E[F] over M ~ Poisson(lambda) with the tail certified below `tail_eps`.
pub(crate) fn average<F: PairFunctional>(
    sys: &PairSystem,
    f: &F,
    lambda: f64,
    tail_eps: f64,
    opts: &EngineOptions,
) -> Result<EngineOutput> {
    if sys.pairs == 0 || lambda == 0.0 {
        let zero = vec![0u32; sys.states];
        return Ok(EngineOutput {
            mean: f.eval(sys, &zero),
            variance: 0.0,
            tail_bound: 0.0,
            samples: 0,
            exact_edges: 0,
            max_edges: 0,
        });
    }
    let mut max_edges = lambda.floor() as u64;
    loop {
        if f.tail(sys, lambda, max_edges).1 <= tail_eps {
            break;
        }
        max_edges += 1;
        if max_edges > opts.max_edges_limit {
            return Err(Error::Unreachable {
                eps: tail_eps,
                reason: format!("edge cutoff would exceed {}", opts.max_edges_limit),
            });
        }
    }
    let unit = sys.states as f64 * f.cost(sys);
    let mut exact_edges = 0u64;
    while exact_edges < max_edges && multisets_up_to(sys.pairs, exact_edges + 1) * unit <= opts.work_budget {
        exact_edges += 1;
    }

    let exact = exact_layer(sys, f, exact_edges);
    let mut mean: f64 = exact.iter().enumerate().map(|(m, v)| poisson_pmf(lambda, m as u64) * v).sum();

    let strata: Vec<u64> = (exact_edges + 1..=max_edges).collect();
    let mc_mass: f64 = strata.iter().map(|&m| poisson_pmf(lambda, m)).sum();
    let alloc: Vec<usize> = strata
        .iter()
        .map(|&m| {
            let share = if mc_mass > 0.0 { poisson_pmf(lambda, m) / mc_mass } else { 0.0 };
            ((opts.mc_samples as f64 * share).round() as usize).max(opts.min_stratum_samples)
        })
        .collect();
    let results: Vec<(f64, f64)> =
        strata.par_iter().zip(alloc.par_iter()).map(|(&m, &n)| stratum(sys, f, m, n, opts.seed)).collect();
    let mut variance = 0.0;
    for ((&m, &n), (g, var)) in strata.iter().zip(&alloc).zip(&results) {
        let pi = poisson_pmf(lambda, m);
        mean += pi * g;
        variance += pi * pi * var / n as f64;
    }
    let (center, tail_bound) = f.tail(sys, lambda, max_edges);
    mean += center;
    Ok(EngineOutput { mean, variance, tail_bound, samples: alloc.iter().sum(), exact_edges, max_edges })
}

/// ln Z of the pair multigraph (self-loops excluded).
pub(crate) struct LogPartitionFn {
    pub beta: f64,
    ln_q: f64,
}

impl LogPartitionFn {
    pub fn new(beta: f64, q: usize) -> Self {
        Self { beta, ln_q: (q as f64).ln() }
    }
}

/// Boltzmann factors relative to the ground energy, so large beta never underflows the sum.
fn relative_weights(beta: f64, energies: &[u32]) -> (u32, Vec<f64>) {
    let e_min = *energies.iter().min().expect("at least one state");
    let e_max = *energies.iter().max().expect("at least one state");
    let table: Vec<f64> = (0..=(e_max - e_min)).map(|d| (-beta * d as f64).exp()).collect();
    (e_min, table)
}

impl PairFunctional for LogPartitionFn {
    fn eval(&self, _sys: &PairSystem, energies: &[u32]) -> f64 {
        let (e_min, table) = relative_weights(self.beta, energies);
        let z: f64 = energies.iter().map(|&e| table[(e - e_min) as usize]).sum();
        self.ln_q - self.beta * e_min as f64 + z.ln()
    }

    fn tail(&self, sys: &PairSystem, lambda: f64, max_edges: u64) -> (f64, f64) {
        // N ln q - beta M <= ln Z <= N ln q for a graph with M edges.
        let top = sys.n as f64 * self.ln_q;
        let p_above = poisson_tail(lambda, max_edges + 1);
        let mean_m_above = lambda * poisson_tail(lambda, max_edges);
        (top * p_above - 0.5 * self.beta * mean_m_above, 0.5 * self.beta * mean_m_above)
    }
}

/// Truncated overlap series sum_{R=1}^{r_max} (a^R / R) S_R with
/// S_R = N^{-2} sum_{ij} <delta(s_i, s_j)>^R - q^{-R}.
pub(crate) struct OverlapSeriesFn {
    pub beta: f64,
    pub r_max: usize,
    coef: Vec<f64>,
    q_pow: Vec<f64>,
}

impl OverlapSeriesFn {
    pub fn new(beta: f64, q: usize, r_max: usize) -> Self {
        let a = -(-beta).exp_m1();
        let coef = (1..=r_max).map(|r| a.powi(r as i32) / r as f64).collect();
        let q_pow = (1..=r_max).map(|r| (q as f64).powi(-(r as i32))).collect();
        Self { beta, r_max, coef, q_pow }
    }

    /// Upper bound of the series, attained when every S_R = 1.
    pub fn ceiling(&self) -> f64 {
        self.coef.iter().sum()
    }
}

impl PairFunctional for OverlapSeriesFn {
    fn eval(&self, sys: &PairSystem, energies: &[u32]) -> f64 {
        let (e_min, table) = relative_weights(self.beta, energies);
        let w: Vec<f64> = energies.iter().map(|&e| table[(e - e_min) as usize]).collect();
        let z: f64 = w.iter().sum();
        let n2 = (sys.n * sys.n) as f64;
        let mut sums = vec![0.0; self.r_max];
        for p in 0..sys.pairs {
            let d = sys.col(p).iter().zip(&w).map(|(&c, &x)| c as f64 * x).sum::<f64>() / z;
            let mut pow = 1.0;
            for s in sums.iter_mut() {
                pow *= d;
                *s += pow;
            }
        }
        sums.iter()
            .zip(&self.coef)
            .zip(&self.q_pow)
            .map(|((s, c), qp)| c * ((sys.n as f64 + 2.0 * s) / n2 - qp).max(0.0))
            .sum()
    }

    fn cost(&self, sys: &PairSystem) -> f64 {
        1.0 + sys.pairs as f64
    }

    fn tail(&self, _sys: &PairSystem, lambda: f64, max_edges: u64) -> (f64, f64) {
        let half = 0.5 * self.ceiling() * poisson_tail(lambda, max_edges + 1);
        (half, half)
    }
}
