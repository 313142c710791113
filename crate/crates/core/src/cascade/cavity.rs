//! Interaction and reaction cavity functionals for cascade trial states.
//!
//! Spins of distinct cavity coordinates are independent given the tree, so
//! both functionals factor: the interaction term over sites, the reaction
//! term over pairs. The exact paths average those factors over the Poisson
//! degree law; the sampled path draws the disorder; the cascade path draws
//! the disorder and the tree and evaluates the normalized ratio directly.

use std::collections::HashMap;

use rand::Rng as _;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{pd_log_atoms, CascadeSpec, Hierarchy, Level, SpinHierarchySpec};
use crate::disorder::{Method, QuenchedEstimate};
use crate::error::{invalid, Error, Result};
use crate::model::ModelParams;
use crate::numeric::{
    composition_count, for_each_composition, ln_poisson_pmf, log_sum_exp, mean_and_stderr, poisson_tail,
};
use crate::rng::{stream, Domain, Rng};

/// How the outer averages are carried out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Estimator {
    /// Closed-form conditional expectations, degree sum truncated at `eps`.
    Exact { eps: f64 },
    /// Closed-form conditional expectations, disorder sampled at size N.
    Sampled { samples: usize, seed: u64 },
    /// Disorder and cascade both sampled, `atoms_per_level` atoms per node.
    Cascade { samples: usize, seed: u64, atoms_per_level: usize },
}

const MAX_DEGREE: usize = 400;
const COMPOSITION_BUDGET: f64 = 2e7;

/// Power mean of order `level` of a discrete law given as (ln p, ln y).
fn ln_power_mean(level: Level, items: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    match level {
        Level::ToZero => items.into_iter().map(|(lp, ly)| lp.exp() * ly).sum(),
        Level::Value(m) => log_sum_exp(items.into_iter().map(|(lp, ly)| lp + m * ly)) / m,
        Level::ToOne => log_sum_exp(items.into_iter().map(|(lp, ly)| lp + ly)),
    }
}

struct Setup {
    beta: f64,
    a: f64,
    q: usize,
    levels: Vec<Level>,
    t: Option<f64>,
}

impl Setup {
    fn new(
        params: &ModelParams,
        n: usize,
        spec: &CascadeSpec,
        hier: &SpinHierarchySpec,
        op: &'static str,
    ) -> Result<Self> {
        if n == 0 {
            return Err(invalid("cavity size must be at least 1"));
        }
        if hier.q != params.q {
            return Err(invalid(format!("hierarchy built for q = {}, model has q = {}", hier.q, params.q)));
        }
        let beta = params.finite_beta(op)?;
        let t = match hier.kind {
            Hierarchy::Uniform => None,
            Hierarchy::SymmetricT { t } => {
                if spec.depth() < 2 {
                    return Err(Error::Unsupported("the symmetric-t hierarchy needs at least two levels".into()));
                }
                Some(t)
            }
        };
        Ok(Self { beta, a: -(-beta).exp_m1(), q: params.q, levels: spec.levels().to_vec(), t })
    }

    fn leaf(&self) -> Level {
        self.levels[self.levels.len() - 1]
    }

    fn center_level(&self) -> Level {
        self.levels[self.levels.len() - 2]
    }

    /// mu_center(color) for equal and unequal colors.
    fn mu(&self, t: f64) -> (f64, f64) {
        let qf = self.q as f64;
        (t + (1.0 - t) / qf, (1.0 - t) / qf)
    }

    fn ln_site_weight(&self, counts: &[usize]) -> f64 {
        log_sum_exp(counts.iter().map(|&k| -self.beta * k as f64))
    }

    /// ln of the nested power means of sum_s exp(-beta n_s) for one site of
    /// degree `d`.
    fn site_value(&self, d: usize) -> f64 {
        let q = self.q;
        let qf = q as f64;
        let ln_q_d = d as f64 * qf.ln();
        match self.t {
            None => {
                if self.leaf() == Level::ToOne {
                    return qf.ln() + d as f64 * (-self.a / qf).ln_1p();
                }
                let mut items = Vec::new();
                for_each_composition(q, d, |n, lm| items.push((lm - ln_q_d, self.ln_site_weight(n))));
                ln_power_mean(self.leaf(), items)
            }
            Some(t) => {
                let (same, diff) = self.mu(t);
                let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();
                let mut items = Vec::new();
                for_each_composition(q, d, |centers, lm| {
                    let mut key = centers.to_vec();
                    key.sort_unstable();
                    let inner =
                        *cache.entry(key).or_insert_with(|| match self.leaf() {
                            Level::ToOne => log_sum_exp(centers.iter().map(|&k| {
                                k as f64 * (-self.a * same).ln_1p() + (d - k) as f64 * (-self.a * diff).ln_1p()
                            })),
                            leaf => {
                                let law = leaf_count_law(q, centers, same, diff);
                                ln_power_mean(leaf, law.iter().map(|(n, p)| (p.ln(), self.ln_site_weight(n))))
                            }
                        });
                    items.push((lm - ln_q_d, inner));
                });
                ln_power_mean(self.center_level(), items)
            }
        }
    }

    /// Per-pair factor of the reaction term.
    fn pair_value(&self) -> f64 {
        let qf = self.q as f64;
        let inner = |p_same: f64| match self.leaf() {
            Level::ToOne => (-self.a * p_same).ln_1p(),
            Level::Value(m) => (-(-(m * self.beta)).exp_m1() * -p_same).ln_1p() / m,
            Level::ToZero => -self.beta * p_same,
        };
        match self.t {
            None => inner(1.0 / qf),
            Some(t) => {
                let t2 = t * t;
                let equal = inner(t2 + (1.0 - t2) / qf);
                let unequal = inner((1.0 - t2) / qf);
                ln_power_mean(self.center_level(), [(-qf.ln(), equal), (((qf - 1.0) / qf).ln(), unequal)])
            }
        }
    }

    fn check_budget(&self, d: usize) -> Result<()> {
        let n = composition_count(self.q, d);
        let work = if self.t.is_some() && self.leaf() != Level::ToOne { n * n * d as f64 } else { n };
        if work > COMPOSITION_BUDGET {
            return Err(Error::BudgetExceeded { needed: work, limit: COMPOSITION_BUDGET });
        }
        Ok(())
    }

    fn site_table(&self, d_max: usize) -> Result<Vec<f64>> {
        self.check_budget(d_max)?;
        Ok((0..=d_max).into_par_iter().map(|d| self.site_value(d)).collect())
    }
}

/// Law of the leaf color counts when `centers[r]` coordinates have center r.
fn leaf_count_law(q: usize, centers: &[usize], same: f64, diff: f64) -> Vec<(Vec<usize>, f64)> {
    let mut law: HashMap<Vec<usize>, f64> = HashMap::from([(vec![0; q], 1.0)]);
    for (r, &k) in centers.iter().enumerate() {
        for _ in 0..k {
            let mut next: HashMap<Vec<usize>, f64> = HashMap::with_capacity(law.len() * q);
            for (n, p) in &law {
                for s in 0..q {
                    let ps = if s == r { same } else { diff };
                    if ps <= 0.0 {
                        continue;
                    }
                    let mut m = n.clone();
                    m[s] += 1;
                    *next.entry(m).or_insert(0.0) += p * ps;
                }
            }
            law = next;
        }
    }
    let mut out: Vec<_> = law.into_iter().collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

fn poisson_draw(lambda: f64, rng: &mut Rng) -> Result<u64> {
    if lambda == 0.0 {
        return Ok(0);
    }
    let law = Poisson::new(lambda).map_err(|e| invalid(e.to_string()))?;
    Ok(law.sample(rng) as u64)
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < 2 {
        return Err(invalid(format!("at least 2 samples required, got {samples}")));
    }
    Ok(())
}

fn mc_estimate(values: &[f64], tail_bound: f64) -> QuenchedEstimate {
    let (mean, se) = mean_and_stderr(values);
    QuenchedEstimate { value: mean, stat_error: se, tail_bound, samples: values.len(), method: Method::MonteCarlo }
}

/// Per-coordinate data a cascade leaf needs.
trait LeafFunctional: Sync {
    fn coords(&self) -> usize;
    fn ln_value(&self, setup: &Setup, spins: &[u8]) -> f64;
    /// ln E[value | centers] (uniform spins when `centers` is None).
    fn ln_mean(&self, setup: &Setup, centers: Option<&[u8]>) -> f64;
}

struct Interaction {
    /// Coordinates attached to each site.
    sites: Vec<Vec<usize>>,
    edges: usize,
}

impl LeafFunctional for Interaction {
    fn coords(&self) -> usize {
        self.edges
    }

    fn ln_value(&self, setup: &Setup, spins: &[u8]) -> f64 {
        let mut counts = vec![0usize; setup.q];
        self.sites
            .iter()
            .map(|site| {
                counts.iter_mut().for_each(|c| *c = 0);
                for &i in site {
                    counts[spins[i] as usize] += 1;
                }
                setup.ln_site_weight(&counts)
            })
            .sum()
    }

    fn ln_mean(&self, setup: &Setup, centers: Option<&[u8]>) -> f64 {
        let qf = setup.q as f64;
        match (centers, setup.t) {
            (Some(centers), Some(t)) => {
                let (same, diff) = setup.mu(t);
                let (ls, ld) = ((-setup.a * same).ln_1p(), (-setup.a * diff).ln_1p());
                self.sites
                    .iter()
                    .map(|site| {
                        log_sum_exp(
                            (0..setup.q).map(|s| {
                                site.iter().map(|&i| if centers[i] as usize == s { ls } else { ld }).sum::<f64>()
                            }),
                        )
                    })
                    .sum()
            }
            _ => self.sites.iter().map(|s| qf.ln() + s.len() as f64 * (-setup.a / qf).ln_1p()).sum(),
        }
    }
}

struct Reaction {
    pairs: usize,
}

impl LeafFunctional for Reaction {
    fn coords(&self) -> usize {
        2 * self.pairs
    }

    fn ln_value(&self, setup: &Setup, spins: &[u8]) -> f64 {
        let equal = spins.chunks_exact(2).filter(|p| p[0] == p[1]).count();
        -setup.beta * equal as f64
    }

    fn ln_mean(&self, setup: &Setup, centers: Option<&[u8]>) -> f64 {
        let qf = setup.q as f64;
        match (centers, setup.t) {
            (Some(centers), Some(t)) => {
                let t2 = t * t;
                let (eq, ne) = ((-setup.a * (t2 + (1.0 - t2) / qf)).ln_1p(), (-setup.a * (1.0 - t2) / qf).ln_1p());
                centers.chunks_exact(2).map(|p| if p[0] == p[1] { eq } else { ne }).sum()
            }
            _ => self.pairs as f64 * (-setup.a / qf).ln_1p(),
        }
    }
}

/// Log numerator and denominator of the cascade ratio, with and without
/// the truncation-tail correction.
#[derive(Clone, Copy)]
struct NodeSums {
    num: f64,
    den: f64,
    num_cut: f64,
    den_cut: f64,
}

struct TreeWalk<'a, F: LeafFunctional> {
    setup: &'a Setup,
    f: &'a F,
    atoms: usize,
}

impl<F: LeafFunctional> TreeWalk<'_, F> {
    fn sample_leaf(&self, centers: Option<&[u8]>, rng: &mut Rng) -> Vec<u8> {
        let q = self.setup.q;
        let n = self.f.coords();
        match (centers, self.setup.t) {
            (Some(centers), Some(t)) => {
                let (same, _) = self.setup.mu(t);
                centers
                    .iter()
                    .map(|&r| {
                        if rng.random::<f64>() < same {
                            r
                        } else {
                            let o = rng.random_range(0..q - 1) as u8;
                            if o >= r {
                                o + 1
                            } else {
                                o
                            }
                        }
                    })
                    .collect()
            }
            _ => (0..n).map(|_| rng.random_range(0..q) as u8).collect(),
        }
    }

    fn node(&self, depth: usize, centers: Option<&[u8]>, rng: &mut Rng) -> NodeSums {
        let depth_max = self.setup.levels.len();
        if depth == depth_max {
            let spins = self.sample_leaf(centers, rng);
            let v = self.f.ln_value(self.setup, &spins);
            return NodeSums { num: v, den: 0.0, num_cut: v, den_cut: 0.0 };
        }
        let level = self.setup.levels[depth];
        if level == Level::ToOne {
            let v = self.f.ln_mean(self.setup, centers);
            return NodeSums { num: v, den: 0.0, num_cut: v, den_cut: 0.0 };
        }
        let (ln_xi, tail) = match level {
            Level::Value(m) => pd_log_atoms(m, self.atoms, rng),
            _ => (vec![0.0], 0.0),
        };
        let fresh_centers = self.setup.t.is_some() && depth + 1 == depth_max - 1;
        let children: Vec<NodeSums> = ln_xi
            .iter()
            .map(|_| {
                if fresh_centers {
                    let c: Vec<u8> = (0..self.f.coords()).map(|_| rng.random_range(0..self.setup.q) as u8).collect();
                    self.node(depth + 1, Some(&c), rng)
                } else {
                    self.node(depth + 1, centers, rng)
                }
            })
            .collect();
        let k = children.len() as f64;
        let combine = |sel: fn(&NodeSums) -> f64, with_tail: bool| {
            let mut terms: Vec<f64> = ln_xi.iter().zip(&children).map(|(l, c)| l + sel(c)).collect();
            if with_tail && tail > 0.0 {
                terms.push(tail.ln() + log_sum_exp(children.iter().map(sel)) - k.ln());
            }
            log_sum_exp(terms)
        };
        NodeSums {
            num: combine(|c| c.num, true),
            den: combine(|c| c.den, true),
            num_cut: combine(|c| c.num_cut, false),
            den_cut: combine(|c| c.den_cut, false),
        }
    }

    /// (ratio with tail correction, ratio without).
    fn ratio(&self, rng: &mut Rng) -> (f64, f64) {
        let r = self.node(0, None, rng);
        (r.num - r.den, r.num_cut - r.den_cut)
    }
}

fn cascade_estimate<F: LeafFunctional>(
    setup: &Setup,
    n: usize,
    samples: usize,
    atoms: usize,
    draw: impl Fn(u64) -> Result<(F, Rng)> + Sync,
) -> Result<QuenchedEstimate> {
    if atoms == 0 {
        return Err(invalid("atoms_per_level must be at least 1"));
    }
    let nf = n as f64;
    let pairs: Vec<(f64, f64)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let (f, mut rng) = draw(i)?;
            let walk = TreeWalk { setup, f: &f, atoms };
            let (with, without) = walk.ratio(&mut rng);
            Ok((with / nf, (with - without).abs() / nf))
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let tail = pairs.iter().map(|p| p.1).sum::<f64>() / samples as f64;
    Ok(mc_estimate(&values, tail))
}

fn draw_interaction(c: f64, n: usize, seed: u64, i: u64) -> Result<(Vec<usize>, Rng)> {
    let mut rng = stream(seed, Domain::CavityInteraction, i);
    let edges = poisson_draw(c * n as f64, &mut rng)?;
    let owners = (0..edges).map(|_| rng.random_range(0..n)).collect();
    Ok((owners, rng))
}

/// Interaction term: (1/N) E ln sum_alpha xi_alpha sum_sigma exp(-beta H).
pub fn cavity_g1(
    params: &ModelParams,
    n: usize,
    spec: &CascadeSpec,
    hier: &SpinHierarchySpec,
    estimator: Estimator,
) -> Result<QuenchedEstimate> {
    let setup = Setup::new(params, n, spec, hier, "cavity_g1")?;
    let c = params.c;
    let qf = setup.q as f64;
    match estimator {
        Estimator::Exact { eps } => {
            if !(eps > 0.0) {
                return Err(invalid(format!("eps must be positive, got {eps}")));
            }
            if c == 0.0 || setup.beta == 0.0 {
                return Ok(QuenchedEstimate::exact(qf.ln()));
            }
            if setup.t.is_none() && setup.leaf() == Level::ToOne {
                return Ok(QuenchedEstimate::exact(setup.site_value(0) + c * (-setup.a / qf).ln_1p()));
            }
            let slope = setup.beta / (2.0 * qf);
            let d_max = (0..=MAX_DEGREE)
                .find(|&d| slope * c * poisson_tail(c, d as u64) <= eps)
                .ok_or_else(|| Error::Unreachable { eps, reason: format!("degree cutoff above {MAX_DEGREE}") })?;
            let table = setup.site_table(d_max)?;
            let body: f64 = table.iter().enumerate().map(|(d, v)| ln_poisson_pmf(c, d as u64).exp() * v).sum();
            let rest = qf.ln() * poisson_tail(c, d_max as u64 + 1) - slope * c * poisson_tail(c, d_max as u64);
            let mut est = QuenchedEstimate::exact(body + rest);
            est.tail_bound = slope * c * poisson_tail(c, d_max as u64);
            Ok(est)
        }
        Estimator::Sampled { samples, seed } => {
            check_samples(samples)?;
            let degrees: Vec<Vec<usize>> = (0..samples as u64)
                .into_par_iter()
                .map(|i| {
                    let (owners, _) = draw_interaction(c, n, seed, i)?;
                    let mut deg = vec![0usize; n];
                    owners.iter().for_each(|&j| deg[j] += 1);
                    Ok(deg)
                })
                .collect::<Result<_>>()?;
            let d_max = degrees.iter().flatten().copied().max().unwrap_or(0);
            let table = setup.site_table(d_max)?;
            let values: Vec<f64> =
                degrees.iter().map(|deg| deg.iter().map(|&d| table[d]).sum::<f64>() / n as f64).collect();
            Ok(mc_estimate(&values, 0.0))
        }
        Estimator::Cascade { samples, seed, atoms_per_level } => {
            check_samples(samples)?;
            cascade_estimate(&setup, n, samples, atoms_per_level, |i| {
                let (owners, rng) = draw_interaction(c, n, seed, i)?;
                let mut sites = vec![Vec::new(); n];
                owners.iter().enumerate().for_each(|(e, &j)| sites[j].push(e));
                Ok((Interaction { sites, edges: owners.len() }, rng))
            })
        }
    }
}

/// Reaction term: (1/N) E ln sum_alpha xi_alpha exp(-beta sum_k delta(tau_{2k-1}, tau_{2k})).
pub fn cavity_g2(
    params: &ModelParams,
    n: usize,
    spec: &CascadeSpec,
    hier: &SpinHierarchySpec,
    estimator: Estimator,
) -> Result<QuenchedEstimate> {
    let setup = Setup::new(params, n, spec, hier, "cavity_g2")?;
    let c = params.c;
    let lambda = 0.5 * c * n as f64;
    match estimator {
        Estimator::Exact { eps } => {
            if !(eps > 0.0) {
                return Err(invalid(format!("eps must be positive, got {eps}")));
            }
            Ok(QuenchedEstimate::exact(0.5 * c * setup.pair_value()))
        }
        Estimator::Sampled { samples, seed } => {
            check_samples(samples)?;
            let w = setup.pair_value();
            let values: Vec<f64> = (0..samples as u64)
                .into_par_iter()
                .map(|i| {
                    let k = poisson_draw(lambda, &mut stream(seed, Domain::CavityReaction, i))?;
                    Ok(k as f64 * w / n as f64)
                })
                .collect::<Result<_>>()?;
            Ok(mc_estimate(&values, 0.0))
        }
        Estimator::Cascade { samples, seed, atoms_per_level } => {
            check_samples(samples)?;
            cascade_estimate(&setup, n, samples, atoms_per_level, |i| {
                let mut rng = stream(seed, Domain::CavityReaction, i);
                let pairs = poisson_draw(lambda, &mut rng)? as usize;
                Ok((Reaction { pairs }, rng))
            })
        }
    }
}

/// G1 - G2, an upper bound on the finite-N quenched pressure.
pub fn rsb_upper_bound(
    params: &ModelParams,
    n: usize,
    spec: &CascadeSpec,
    hier: &SpinHierarchySpec,
    estimator: Estimator,
) -> Result<QuenchedEstimate> {
    let one = cavity_g1(params, n, spec, hier, estimator)?;
    let two = cavity_g2(params, n, spec, hier, estimator)?;
    Ok(QuenchedEstimate {
        value: one.value - two.value,
        stat_error: one.stat_error.hypot(two.stat_error),
        tail_bound: one.tail_bound + two.tail_bound,
        samples: one.samples.max(two.samples),
        method: one.method,
    })
}
