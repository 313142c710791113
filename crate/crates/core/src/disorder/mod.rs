//! Poisson disorder: coupling samplers, quenched averages with certified
//! truncation, the overlap sum rule, and the balanced restricted partition
//! function with its conditional moments.

mod engine;

use rand::Rng as _;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{one_minus_boltzmann, ExtReal};
use crate::error::{invalid, Error, Result};
use crate::model::{for_each_config, pressure_density, CouplingMatrix, EnumBudget, ModelParams};
use crate::numeric::{gauss_legendre, ln_factorial, log_sum_exp, mean_and_stderr, LogSumExp};
use crate::rng::{child_seed, stream, Domain, Rng};

use engine::{EngineOptions, LogPartitionFn, OverlapSeriesFn, PairSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactConditional,
    MonteCarlo,
}

/// A value with its statistical and certified truncation errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuenchedEstimate {
    pub value: f64,
    pub stat_error: f64,
    pub tail_bound: f64,
    pub samples: usize,
    pub method: Method,
}

impl QuenchedEstimate {
    pub fn exact(value: f64) -> Self {
        Self { value, stat_error: 0.0, tail_bound: 0.0, samples: 0, method: Method::ExactConditional }
    }

    /// Tail bound plus `k` standard errors.
    pub fn error_budget(&self, k: f64) -> f64 {
        self.tail_bound + k * self.stat_error
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeList {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl EdgeList {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn to_couplings(&self) -> CouplingMatrix {
        let mut j = CouplingMatrix::zeros(self.n);
        for &(a, b) in &self.pairs {
            j.add(a, b);
        }
        j
    }
}

pub fn sample_couplings_with(n: usize, c: f64, rng: &mut Rng) -> Result<CouplingMatrix> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if !(c >= 0.0 && c.is_finite()) {
        return Err(invalid(format!("c must be finite and nonnegative, got {c}")));
    }
    let mut j = CouplingMatrix::zeros(n);
    if c == 0.0 {
        return Ok(j);
    }
    let law = Poisson::new(c / (2.0 * n as f64)).map_err(|e| invalid(e.to_string()))?;
    for a in 0..n {
        for b in 0..n {
            j.set(a, b, law.sample(rng) as u32);
        }
    }
    Ok(j)
}

/// N^2 independent Poisson(c / 2N) couplings from stream 0 of `seed`.
pub fn sample_couplings(n: usize, c: f64, seed: u64) -> Result<CouplingMatrix> {
    sample_couplings_with(n, c, &mut stream(seed, Domain::Couplings, 0))
}

pub fn sample_edges_given_k_with(n: usize, k: usize, rng: &mut Rng) -> Result<EdgeList> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let pairs = (0..k).map(|_| (rng.random_range(0..n), rng.random_range(0..n))).collect();
    Ok(EdgeList { n, pairs })
}

/// K i.i.d. uniform ordered pairs, the law of the couplings given |J| = K.
pub fn sample_edges_given_k(n: usize, k: usize, seed: u64) -> Result<EdgeList> {
    sample_edges_given_k_with(n, k, &mut stream(seed, Domain::EdgeLists, 0))
}

/// Tuning of the conditional quenched average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuenchedOptions {
    /// Bound on (enumerated multigraphs) x (spin states) x (functional cost).
    pub work_budget: f64,
    /// Total Monte Carlo draws spread over the sampled edge counts.
    pub mc_samples: usize,
    pub min_stratum_samples: usize,
    /// Largest admissible edge-count cutoff.
    pub max_edges_limit: u64,
    pub spin_budget: EnumBudget,
    pub seed: u64,
}

impl Default for QuenchedOptions {
    fn default() -> Self {
        Self {
            work_budget: 2e8,
            mc_samples: 40_000,
            min_stratum_samples: 64,
            max_edges_limit: 20_000,
            spin_budget: EnumBudget::default(),
            seed: 0x5eed,
        }
    }
}

impl QuenchedOptions {
    fn engine(&self, seed: u64) -> EngineOptions {
        EngineOptions {
            work_budget: self.work_budget,
            mc_samples: self.mc_samples,
            min_stratum_samples: self.min_stratum_samples,
            max_edges_limit: self.max_edges_limit,
            seed,
        }
    }
}

fn pair_system(n: usize, q: usize, budget: EnumBudget) -> Result<PairSystem> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    budget.check((q as f64).powi(n as i32 - 1))?;
    Ok(PairSystem::new(n, q))
}

/// Details of a conditional quenched computation beyond the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuenchedReport {
    pub estimate: QuenchedEstimate,
    /// Largest pair-edge count averaged by full enumeration.
    pub exact_edges: u64,
    /// Pair-edge counts above this are covered by the certified tail.
    pub max_edges: u64,
}

/// p_N(beta, c) with the truncation tail certified below eps / 2.
///
/// Self-loops contribute exactly -beta c / (2N). The pair multigraph is
/// enumerated exactly up to the work budget, sampled per edge count above it,
/// and bounded beyond the cutoff using N ln q - beta M <= ln Z <= N ln q.
pub fn quenched_pressure_exact(params: &ModelParams, n: usize, eps: f64) -> Result<QuenchedEstimate> {
    Ok(quenched_pressure_report(params, n, eps, &QuenchedOptions::default())?.estimate)
}

pub fn quenched_pressure_report(
    params: &ModelParams,
    n: usize,
    eps: f64,
    opts: &QuenchedOptions,
) -> Result<QuenchedReport> {
    let beta = params.finite_beta("quenched_pressure_exact")?;
    if !(eps > 0.0) {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    let (q, c) = (params.q, params.c);
    let sys = pair_system(n, q, opts.spin_budget)?;
    let nf = n as f64;
    if beta == 0.0 || c == 0.0 {
        return Ok(QuenchedReport { estimate: QuenchedEstimate::exact((q as f64).ln()), exact_edges: 0, max_edges: 0 });
    }
    let lambda = c * (nf - 1.0) / 2.0;
    let f = LogPartitionFn::new(beta, q);
    let out = engine::average(&sys, &f, lambda, 0.5 * eps * nf, &opts.engine(opts.seed))?;
    Ok(QuenchedReport {
        estimate: QuenchedEstimate {
            value: out.mean / nf - beta * c / (2.0 * nf),
            stat_error: out.variance.sqrt() / nf,
            tail_bound: out.tail_bound / nf,
            samples: out.samples,
            method: Method::ExactConditional,
        },
        exact_edges: out.exact_edges,
        max_edges: out.max_edges,
    })
}

/// Plain Monte Carlo over i.i.d. coupling draws; draw i uses stream i.
pub fn quenched_pressure_mc(params: &ModelParams, n: usize, samples: usize, seed: u64) -> Result<QuenchedEstimate> {
    let beta = params.finite_beta("quenched_pressure_mc")?;
    if samples < 2 {
        return Err(invalid(format!("at least 2 samples required, got {samples}")));
    }
    let (q, c) = (params.q, params.c);
    EnumBudget::default().check((q as f64).powi(n as i32))?;
    if beta == 0.0 || c == 0.0 {
        return Ok(QuenchedEstimate {
            value: (q as f64).ln(),
            stat_error: 0.0,
            tail_bound: 0.0,
            samples,
            method: Method::MonteCarlo,
        });
    }
    let values: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Domain::QuenchedMc, i);
            let j = sample_couplings_with(n, c, &mut rng)?;
            pressure_density(&j, q, beta)
        })
        .collect::<Result<_>>()?;
    let (value, stat_error) = mean_and_stderr(&values);
    Ok(QuenchedEstimate { value, stat_error, tail_bound: 0.0, samples, method: Method::MonteCarlo })
}

/// Sum-rule deficit with its separate error components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumRuleEstimate {
    /// `tail_bound` is the R-truncation plus edge-count truncation remainder.
    pub estimate: QuenchedEstimate,
    pub quadrature_error: f64,
    pub r_truncation: f64,
    pub k_truncation: f64,
}

impl SumRuleEstimate {
    pub fn error_budget(&self) -> f64 {
        self.quadrature_error + self.estimate.tail_bound
    }
}

/// Per-node edge-count truncation target inside the sum rule.
const SUM_RULE_NODE_EPS: f64 = 1e-7;

/// (1/2) sum_{R <= r_max} (a^R / R) int_0^c E[S_R] dc' with a = 1 - e^{-beta}.
///
/// The quadrature error is estimated by comparing against the rule with half
/// as many nodes; quadrature node i draws from child seed i of `seed`.
pub fn sum_rule_deficit(
    params: &ModelParams,
    n: usize,
    r_max: usize,
    quad_points: usize,
    seed: u64,
) -> Result<SumRuleEstimate> {
    sum_rule_deficit_with(params, n, r_max, quad_points, &QuenchedOptions { seed, ..Default::default() })
}

pub fn sum_rule_deficit_with(
    params: &ModelParams,
    n: usize,
    r_max: usize,
    quad_points: usize,
    opts: &QuenchedOptions,
) -> Result<SumRuleEstimate> {
    let beta = params.finite_beta("sum_rule_deficit")?;
    if r_max < 1 {
        return Err(invalid("r_max must be at least 1"));
    }
    if quad_points < 3 {
        return Err(invalid("quad_points must be at least 3"));
    }
    let (q, c) = (params.q, params.c);
    let sys = pair_system(n, q, opts.spin_budget)?;
    if beta == 0.0 || c == 0.0 {
        return Ok(SumRuleEstimate {
            estimate: QuenchedEstimate::exact(0.0),
            quadrature_error: 0.0,
            r_truncation: 0.0,
            k_truncation: 0.0,
        });
    }
    let a = one_minus_boltzmann(ExtReal::Finite(beta));
    let f = OverlapSeriesFn::new(beta, q, r_max);
    let rule = |points: usize, offset: u64| -> Result<(f64, f64, f64, usize)> {
        let (x, w) = gauss_legendre(points);
        let nodes: Vec<(f64, f64, u64)> = x
            .iter()
            .zip(&w)
            .enumerate()
            .map(|(i, (&xi, &wi))| (0.5 * c * (xi + 1.0), 0.5 * c * wi, offset + i as u64))
            .collect();
        let outs: Vec<engine::EngineOutput> = nodes
            .iter()
            .map(|&(cp, _, idx)| {
                let lambda = cp * (n as f64 - 1.0) / 2.0;
                engine::average(
                    &sys,
                    &f,
                    lambda,
                    SUM_RULE_NODE_EPS,
                    &opts.engine(child_seed(opts.seed, Domain::SumRule, idx)),
                )
            })
            .collect::<Result<_>>()?;
        let mut value = 0.0;
        let mut var = 0.0;
        let mut tail = 0.0;
        let mut samples = 0;
        for (&(_, wi, _), o) in nodes.iter().zip(&outs) {
            value += 0.5 * wi * o.mean;
            var += (0.5 * wi).powi(2) * o.variance;
            tail += 0.5 * wi * o.tail_bound;
            samples += o.samples;
        }
        Ok((value, var, tail, samples))
    };
    let (value, var, k_truncation, samples) = rule(quad_points, 0)?;
    let (coarse, _, _, _) = rule(quad_points.div_ceil(2), quad_points as u64)?;
    let r_truncation = 0.5 * c * a.powi(r_max as i32 + 1) / ((r_max as f64 + 1.0) * (1.0 - a));
    Ok(SumRuleEstimate {
        estimate: QuenchedEstimate {
            value,
            stat_error: var.sqrt(),
            tail_bound: r_truncation + k_truncation,
            samples,
            method: Method::ExactConditional,
        },
        quadrature_error: (value - coarse).abs(),
        r_truncation,
        k_truncation,
    })
}

fn balanced_size(n: usize, q: usize) -> Result<usize> {
    if !n.is_multiple_of(q) {
        return Err(invalid(format!("N = {n} is not divisible by q = {q}")));
    }
    Ok(n / q)
}

/// ln of the partition function restricted to configurations with exactly
/// N/q sites of each color; at beta = inf, ln of the number of balanced
/// proper colorings (-inf when there are none).
pub fn restricted_partition_balanced(j: &CouplingMatrix, beta: ExtReal, q: usize) -> Result<f64> {
    let per_color = balanced_size(j.n(), q)?;
    EnumBudget::default().check((q as f64).powi(j.n() as i32))?;
    let mut acc = LogSumExp::default();
    let mut counts = vec![0usize; q];
    for_each_config(j, q, |s, e| {
        counts.fill(0);
        for &c in s {
            counts[c as usize] += 1;
        }
        if counts.iter().any(|&k| k != per_color) {
            return;
        }
        match beta {
            ExtReal::Finite(b) => acc.push(-b * e as f64),
            ExtReal::Infinite => {
                if e == 0 {
                    acc.push(0.0)
                }
            }
        }
    });
    Ok(acc.value())
}

/// Limit on visited cells when enumerating integer pair tables.
const TABLE_BUDGET: f64 = 1e7;

/// Exact (E[Z_bal | |J| = K], E[Z_bal^2 | |J| = K]) for the balanced
/// restricted partition function.
pub fn conditional_moments_balanced(n: usize, q: usize, beta: f64, k: u64) -> Result<(f64, f64)> {
    let per = balanced_size(n, q)?;
    if !(beta >= 0.0) || beta.is_infinite() {
        return Err(invalid(format!("beta must be finite and nonnegative, got {beta}")));
    }
    let a = one_minus_boltzmann(ExtReal::Finite(beta));
    let qf = q as f64;
    let ln_bal = ln_factorial(n as u64) - qf * ln_factorial(per as u64);
    let first = (ln_bal + k as f64 * (-a / qf).ln_1p()).exp();

    // Tables with all row and column sums equal to N/q, filled row-major.
    let mut terms = Vec::new();
    let mut table = vec![0usize; q * q];
    let mut col_left = vec![per; q];
    let mut visited = 0.0f64;
    #[allow(clippy::too_many_arguments)]
    fn fill(
        cell: usize,
        row_left: usize,
        q: usize,
        per: usize,
        table: &mut [usize],
        col_left: &mut [usize],
        visited: &mut f64,
        out: &mut Vec<Vec<usize>>,
    ) -> Result<()> {
        *visited += 1.0;
        if *visited > TABLE_BUDGET {
            return Err(Error::BudgetExceeded { needed: *visited, limit: TABLE_BUDGET });
        }
        if cell == q * q {
            if col_left.iter().all(|&l| l == 0) {
                out.push(table.to_vec());
            }
            return Ok(());
        }
        let col = cell % q;
        if col == q - 1 {
            let v = row_left;
            if v > col_left[col] {
                return Ok(());
            }
            table[cell] = v;
            col_left[col] -= v;
            fill(cell + 1, per, q, per, table, col_left, visited, out)?;
            col_left[col] += v;
            table[cell] = 0;
            return Ok(());
        }
        for v in 0..=row_left.min(col_left[col]) {
            table[cell] = v;
            col_left[col] -= v;
            fill(cell + 1, row_left - v, q, per, table, col_left, visited, out)?;
            col_left[col] += v;
        }
        table[cell] = 0;
        Ok(())
    }
    fill(0, per, q, per, &mut table, &mut col_left, &mut visited, &mut terms)?;

    let nf = n as f64;
    let ln_terms = terms.iter().map(|t| {
        let sq: f64 = t.iter().map(|&v| (v as f64 / nf).powi(2)).sum();
        let w = (1.0 - 2.0 * a / qf + a * a * sq).ln();
        let ln_multi = ln_factorial(n as u64) - t.iter().map(|&v| ln_factorial(v as u64)).sum::<f64>();
        ln_multi + k as f64 * w
    });
    let second = log_sum_exp(ln_terms).exp();
    Ok((first, second))
}

#[cfg(test)]
mod tests;
