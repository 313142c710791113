//! The two-level replica-symmetric ansatz: cavity corrections g1 and g2 as
//! functions of the polarization t in [-1/(q-1), 1], the resulting upper
//! bound on the pressure, and the local instability criterion c x^2 > 1.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{annealed_pressure_at, x_param, ExtReal};
use crate::error::{invalid, Error, Result};
use crate::numeric::{composition_count, for_each_composition, log_sum_exp, poisson_pmf, poisson_tail};

fn check_t(q: usize, t: f64) -> Result<()> {
    let lo = -1.0 / (q as f64 - 1.0);
    if !(t >= lo - 1e-12 && t <= 1.0 + 1e-12) {
        return Err(invalid(format!("t = {t} outside [{lo}, 1]")));
    }
    Ok(())
}

fn check_common(q: usize, c: f64) -> Result<()> {
    if q < 2 {
        return Err(invalid(format!("q must be at least 2, got {q}")));
    }
    if !(c >= 0.0 && c.is_finite()) {
        return Err(invalid(format!("c must be finite and nonnegative, got {c}")));
    }
    Ok(())
}

/// t-grid of the scans: 201 uniform points on [-1/(q-1), 1].
pub fn t_grid(q: usize, points: usize) -> Vec<f64> {
    let lo = -1.0 / (q as f64 - 1.0);
    (0..points).map(|i| lo + (1.0 - lo) * i as f64 / (points - 1) as f64).collect()
}

pub const T_GRID_POINTS: usize = 201;

/// (c / 2q) [(q-1) ln(1 + x t^2) + ln(1 - (q-1) x t^2)].
pub fn g2(beta: impl Into<ExtReal>, c: f64, q: usize, t: f64) -> Result<f64> {
    check_common(q, c)?;
    let x = x_param(beta.into(), q);
    let qf = q as f64;
    let (u, v) = (1.0 + x * t * t, 1.0 - (qf - 1.0) * x * t * t);
    if u <= 0.0 || v <= 0.0 {
        return Err(invalid(format!("logarithm argument nonpositive at t = {t}")));
    }
    if x == 0.0 || t == 0.0 {
        return Ok(0.0);
    }
    Ok(c / (2.0 * qf) * ((qf - 1.0) * (x * t * t).ln_1p() + (-(qf - 1.0) * x * t * t).ln_1p()))
}

/// g1 value with its truncation data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G1Value {
    pub value: f64,
    pub tail: f64,
    pub k_truncation: u64,
}

/// Limit on the total number of color-count profiles visited by g1.
const COMPOSITION_BUDGET: f64 = 5e7;

struct G1Kernel {
    ln_a: f64,
    ln_b: f64,
    q: usize,
}

impl G1Kernel {
    fn new(x: f64, q: usize, t: f64) -> Self {
        let qf = q as f64;
        Self { ln_a: (-x * t * (qf - 1.0)).ln_1p(), ln_b: (x * t).ln_1p(), q }
    }

    /// Per-edge bound on |ln(...)|, so the k-th term is at most k times this.
    fn per_edge(&self) -> f64 {
        self.ln_a.abs().max(self.ln_b.abs())
    }

    /// E over uniform tau in [q]^k of ln(q^{-1} sum_s A^{n_s} B^{k - n_s}).
    fn term(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let qf = self.q as f64;
        let ln_norm = -(k as f64) * qf.ln();
        let mut acc = 0.0;
        for_each_composition(self.q, k, |counts, ln_multi| {
            let inner =
                log_sum_exp(counts.iter().map(|&ns| ns as f64 * self.ln_a + (k - ns) as f64 * self.ln_b)) - qf.ln();
            acc += (ln_multi + ln_norm).exp() * inner;
        });
        acc
    }
}

fn g1_cutoff(c: f64, per_edge: f64, eps: f64) -> Result<u64> {
    if c == 0.0 || per_edge == 0.0 {
        return Ok(0);
    }
    if !per_edge.is_finite() {
        return Err(Error::Unreachable { eps, reason: "unbounded per-edge logarithm".into() });
    }
    let mut k = c.floor() as u64;
    while per_edge * c * poisson_tail(c, k) > eps {
        k += 1;
        if k > 100_000 {
            return Err(Error::Unreachable { eps, reason: "Poisson cutoff too large".into() });
        }
    }
    Ok(k)
}

fn g1_sum(x: f64, c: f64, q: usize, t: f64, k_max: u64) -> Result<G1Value> {
    let kernel = G1Kernel::new(x, q, t);
    let profiles: f64 = (0..=k_max).map(|k| composition_count(q, k as usize)).sum();
    if profiles > COMPOSITION_BUDGET {
        return Err(Error::BudgetExceeded { needed: profiles, limit: COMPOSITION_BUDGET });
    }
    let terms: Vec<f64> = (0..=k_max).into_par_iter().map(|k| poisson_pmf(c, k) * kernel.term(k as usize)).collect();
    let value = terms.iter().sum();
    // sum_{k > k_max} pi_k k = c P(K >= k_max).
    let tail = if c == 0.0 { 0.0 } else { kernel.per_edge() * c * poisson_tail(c, k_max) };
    Ok(G1Value { value, tail, k_truncation: k_max })
}

/// Truncated-Poisson g1 with the inner expectation over tau reduced to
/// color-count profiles; the tail beyond k_max is certified below eps.
pub fn g1(beta: impl Into<ExtReal>, c: f64, q: usize, t: f64, eps: f64) -> Result<G1Value> {
    check_common(q, c)?;
    check_t(q, t)?;
    if !(eps > 0.0) {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    let x = x_param(beta.into(), q);
    if x == 0.0 || t == 0.0 || c == 0.0 {
        return Ok(G1Value { value: 0.0, tail: 0.0, k_truncation: 0 });
    }
    let k_max = g1_cutoff(c, G1Kernel::new(x, q, t).per_edge(), eps)?;
    g1_sum(x, c, q, t, k_max)
}

/// g1 with a caller-fixed Poisson cutoff.
pub fn g1_fixed_cutoff(beta: impl Into<ExtReal>, c: f64, q: usize, t: f64, k_max: u64) -> Result<G1Value> {
    check_common(q, c)?;
    check_t(q, t)?;
    let x = x_param(beta.into(), q);
    g1_sum(x, c, q, t, k_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsEvaluation {
    pub g1: f64,
    pub g2: f64,
    pub gap: f64,
    pub rs_bound: f64,
    pub k_truncation: u64,
    pub tail_bound: f64,
}

pub fn rs_bound(beta: impl Into<ExtReal>, c: f64, q: usize, t: f64, eps: f64) -> Result<RsEvaluation> {
    let beta = beta.into();
    let one = g1(beta, c, q, t, eps)?;
    let two = g2(beta, c, q, t)?;
    let gap = one.value - two;
    Ok(RsEvaluation {
        g1: one.value,
        g2: two,
        gap,
        rs_bound: annealed_pressure_at(q, beta, c) + gap,
        k_truncation: one.k_truncation,
        tail_bound: one.tail,
    })
}

/// True iff c x(beta, q)^2 > 1.
pub fn instability(beta: impl Into<ExtReal>, c: f64, q: usize) -> bool {
    let x = x_param(beta.into(), q);
    c * x * x > 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarticCoefficients {
    /// t^4 coefficient of g1, by finite differences.
    pub a1: f64,
    /// t^4 coefficient of g2, by finite differences.
    pub a2: f64,
    /// -(q-1) c^2 x^4 / 4.
    pub ref1: f64,
    /// -(q-1) c x^2 / 4.
    pub ref2: f64,
}

pub const QUARTIC_STEP: f64 = 0.05;
const QUARTIC_G1_EPS: f64 = 1e-12;

/// Fourth derivative at 0 of an even function from f(0), f(h), f(2h), f(4h):
/// the even five-point stencil at steps h and 2h combined by one Richardson level.
fn even_fourth_derivative(f0: f64, fh: f64, f2h: f64, f4h: f64, h: f64) -> f64 {
    let d = |a: f64, b: f64, s: f64| (2.0 * b - 8.0 * a + 6.0 * f0) / s.powi(4);
    let dh = d(fh, f2h, h);
    let d2h = d(f2h, f4h, 2.0 * h);
    (4.0 * dh - d2h) / 3.0
}

pub fn quartic_coefficients(beta: impl Into<ExtReal>, c: f64, q: usize) -> Result<QuarticCoefficients> {
    let beta = beta.into();
    check_common(q, c)?;
    let h = QUARTIC_STEP;
    let x = x_param(beta, q);
    let qf = q as f64;
    let ref1 = -0.25 * (qf - 1.0) * c * c * x.powi(4);
    let ref2 = -0.25 * (qf - 1.0) * c * x * x;
    if x == 0.0 || c == 0.0 {
        return Ok(QuarticCoefficients { a1: 0.0, a2: 0.0, ref1, ref2 });
    }
    // Stencil noise from the g1 truncation, expressed as a t^4 coefficient.
    let noise = 16.0 * QUARTIC_G1_EPS / h.powi(4) / 24.0;
    if noise > 1e-3 * ref1.abs() {
        return Err(Error::IllConditioned(format!(
            "g1 truncation noise {noise:e} too large against target {ref1:e} at h = {h}"
        )));
    }
    // One cutoff for every stencil point, chosen at the widest t.
    let k_max = g1_cutoff(c, G1Kernel::new(x, q, 4.0 * h).per_edge(), QUARTIC_G1_EPS)?;
    let ts = [0.0, h, 2.0 * h, 4.0 * h];
    let f1: Vec<f64> =
        ts.iter().map(|&t| g1_fixed_cutoff(beta, c, q, t, k_max).map(|v| v.value)).collect::<Result<_>>()?;
    let f2: Vec<f64> = ts.iter().map(|&t| g2(beta, c, q, t)).collect::<Result<_>>()?;
    Ok(QuarticCoefficients {
        a1: even_fourth_derivative(f1[0], f1[1], f1[2], f1[3], h) / 24.0,
        a2: even_fourth_derivative(f2[0], f2[1], f2[2], f2[3], h) / 24.0,
        ref1,
        ref2,
    })
}
