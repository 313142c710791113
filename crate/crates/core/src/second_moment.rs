//! Constrained second-moment functional: the pair-overlap large-deviation
//! rate phi2, the restricted (k, t) family and its closed form, the
//! zero-temperature rescaling, the (k, t) optimizer and the q = 2 analysis.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{annealed_pressure_at, beta_1, beta_rs_loc, one_minus_boltzmann, x_param, ExtReal};
use crate::error::{invalid, Result};

/// Probability mass on [q]^2, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapMeasure {
    q: usize,
    mass: Vec<f64>,
}

const MASS_TOL: f64 = 1e-12;

impl OverlapMeasure {
    pub fn new(q: usize, mass: Vec<f64>) -> Result<Self> {
        if q < 2 {
            return Err(invalid(format!("q must be at least 2, got {q}")));
        }
        if mass.len() != q * q {
            return Err(invalid(format!("expected {} cells, got {}", q * q, mass.len())));
        }
        if mass.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(invalid("cell masses must be finite and nonnegative"));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(invalid(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { q, mass })
    }

    pub fn uniform(q: usize) -> Self {
        Self { q, mass: vec![1.0 / (q * q) as f64; q * q] }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn get(&self, r1: usize, r2: usize) -> f64 {
        self.mass[r1 * self.q + r2]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.mass.chunks(self.q).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.q).map(|c| (0..self.q).map(|r| self.get(r, c)).sum()).collect()
    }

    /// Both marginals uniform, i.e. a member of the balanced overlap set.
    pub fn is_balanced(&self) -> bool {
        let target = 1.0 / self.q as f64;
        self.row_sums().iter().chain(&self.col_sums()).all(|s| (s - target).abs() <= MASS_TOL)
    }

    /// -sum mu ln mu with 0 ln 0 = 0.
    pub fn entropy(&self) -> f64 {
        -self.mass.iter().filter(|&&m| m > 0.0).map(|&m| m * m.ln()).sum::<f64>()
    }
}

/// s(mu) + (kappa/2) ln(1 - 2a/q + a^2 sum mu^2), a = 1 - e^{-beta}.
pub fn phi2(beta: impl Into<ExtReal>, kappa: f64, q: usize, mu: &OverlapMeasure) -> Result<f64> {
    if mu.q() != q {
        return Err(invalid(format!("measure is on [{}]^2, expected q = {q}", mu.q())));
    }
    let a = one_minus_boltzmann(beta.into());
    let sq: f64 = mu.mass.iter().map(|m| m * m).sum();
    Ok(mu.entropy() + 0.5 * kappa * (1.0 - 2.0 * a / q as f64 + a * a * sq).ln())
}

fn check_unit_range(name: &str, v: f64, q: usize) -> Result<()> {
    if !(v >= 0.0 && v <= q as f64) {
        return Err(invalid(format!("{name} = {v} outside [0, {q}]")));
    }
    Ok(())
}

/// Rows 0..k are uniform 1/q^2; each row r >= k puts t/q^2 on column 0 and
/// (q - t)/((q - 1) q^2) on every other column.
pub fn mu_kt(q: usize, k: usize, t: f64) -> Result<OverlapMeasure> {
    if k > q {
        return Err(invalid(format!("k = {k} outside [0, {q}]")));
    }
    check_unit_range("t", t, q)?;
    let qf = q as f64;
    let q2 = qf * qf;
    let mut mass = vec![0.0; q * q];
    for r1 in 0..q {
        for r2 in 0..q {
            mass[r1 * q + r2] = if r1 < k {
                1.0 / q2
            } else if r2 == 0 {
                t / q2
            } else {
                (qf - t) / ((qf - 1.0) * q2)
            };
        }
    }
    OverlapMeasure::new(q, mass)
}

fn xlogx(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v * v.ln()
    }
}

/// Phi2(k, t) - 2P in terms of x = x(beta, q), for real k in [0, q].
fn gap_kt(x: f64, c: f64, q: usize, k: f64, t: f64) -> f64 {
    let qf = q as f64;
    let entropy_loss = (qf - k) * (xlogx(t) + (qf - t) * ((qf - t) / (qf - 1.0)).ln().max(f64::MIN)) / (qf * qf);
    let entropy_loss = if qf - t == 0.0 { (qf - k) * xlogx(t) / (qf * qf) } else { entropy_loss };
    0.5 * c * (x * x * (qf - k) * (t - 1.0).powi(2) / (qf * (qf - 1.0))).ln_1p() - entropy_loss
}

/// Closed form of phi2(beta, c, q, mu_kt): 2P(beta, c) plus
/// (c/2) ln(1 + x^2 (q-k)(t-1)^2 / (q(q-1))) - (q-k)[t ln t + (q-t) ln((q-t)/(q-1))] / q^2.
pub fn phi2_kt(beta: impl Into<ExtReal>, c: f64, q: usize, k: f64, t: f64) -> Result<f64> {
    let beta = beta.into();
    check_unit_range("k", k, q)?;
    check_unit_range("t", t, q)?;
    Ok(2.0 * annealed_pressure_at(q, beta, c) + gap_kt(x_param(beta, q), c, q, k, t))
}

/// Zero-temperature image of (c, k) and the positive multiplier relating the
/// two gaps: multiplier * (Phi2(beta, c, k, t) - 2P(beta, c))
/// = Phi2(inf, c_frak, k_frak, t) - 2P(inf, c_frak).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rescaled {
    pub c_frak: f64,
    pub k_frak: f64,
    pub multiplier: f64,
}

pub fn rescale(beta: impl Into<ExtReal>, q: usize, c: f64, k: f64) -> Rescaled {
    let qf = q as f64;
    let x = x_param(beta.into(), q);
    let multiplier = (x * (qf - 1.0)).powi(2);
    Rescaled { c_frak: multiplier * c, k_frak: qf - multiplier * (qf - k), multiplier }
}

/// Gap of the zero-temperature problem at a real (possibly out-of-range) k.
pub fn phi2_kt_gap_at_infinity(c: f64, q: usize, k: f64, t: f64) -> f64 {
    gap_kt(1.0 / (q as f64 - 1.0), c, q, k, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondMomentResult {
    pub t_star: f64,
    pub k_star: f64,
    pub max_gap: f64,
    pub certified: bool,
}

pub const CERTIFY_TOL: f64 = 1e-9;
pub const GRID_POINTS: usize = 401;
const REFINE_SWEEPS: usize = 4;
const GOLDEN_ITERS: usize = 80;

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..GOLDEN_ITERS {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    if fa >= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

/// Maximize Phi2(k, t) - 2P over [0, q]^2: a 401 x 401 grid (with t = 1
/// added to the t axis), ties broken towards the lowest k then the lowest t,
/// then golden-section refinement around the best cell.
/// Refinement steps smaller than this are rounding noise near flat maxima.
const REFINE_MIN_GAIN: f64 = 1e-14;

pub fn optimize(beta: impl Into<ExtReal>, c: f64, q: usize) -> Result<SecondMomentResult> {
    if q < 2 {
        return Err(invalid(format!("q must be at least 2, got {q}")));
    }
    let x = x_param(beta.into(), q);
    let qf = q as f64;
    let step = qf / (GRID_POINTS - 1) as f64;
    let ks: Vec<f64> = (0..GRID_POINTS).map(|i| i as f64 * step).collect();
    let mut ts = ks.clone();
    if !ts.contains(&1.0) {
        ts.push(1.0);
        ts.sort_by(f64::total_cmp);
    }
    let f = |k: f64, t: f64| gap_kt(x, c, q, k, t);
    let rows: Vec<(f64, usize)> = ks
        .par_iter()
        .map(|&k| {
            let mut best = (f64::NEG_INFINITY, 0);
            for (j, &t) in ts.iter().enumerate() {
                let v = f(k, t);
                if v > best.0 {
                    best = (v, j);
                }
            }
            best
        })
        .collect();
    let (mut ki, mut best) = (0, rows[0]);
    for (i, &row) in rows.iter().enumerate() {
        if row.0 > best.0 {
            ki = i;
            best = row;
        }
    }
    let (mut k, mut t, mut value) = (ks[ki], ts[best.1], best.0);
    let t_lo = if best.1 > 0 { ts[best.1 - 1] } else { 0.0 };
    let t_hi = ts.get(best.1 + 1).copied().unwrap_or(qf);
    let k_lo = (k - step).max(0.0);
    let k_hi = (k + step).min(qf);
    for _ in 0..REFINE_SWEEPS {
        let (tn, vt) = golden_max(|tt| f(k, tt), t_lo, t_hi);
        if vt > value + REFINE_MIN_GAIN {
            t = tn;
            value = vt;
        }
        let (kn, vk) = golden_max(|kk| f(kk, t), k_lo, k_hi);
        if vk > value + REFINE_MIN_GAIN {
            k = kn;
            value = vk;
        }
    }
    Ok(SecondMomentResult { t_star: t, k_star: k, max_gap: value, certified: value <= CERTIFY_TOL })
}

/// Linearized upper bound on phi2 - 2P at q = 2 for the overlap parameter theta:
/// -theta ln(2 theta) - (1 - theta) ln(2 (1 - theta)) + (c/2) x^2 (2 theta - 1)^2.
pub fn ising_gap(beta: impl Into<ExtReal>, c: f64, theta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(invalid(format!("theta = {theta} outside [0, 1]")));
    }
    let x = x_param(beta.into(), 2);
    let ent = -xlogx(theta) - xlogx(1.0 - theta) - 2f64.ln();
    Ok(ent + 0.5 * c * x * x * (2.0 * theta - 1.0).powi(2))
}

/// Certified lower bound on the annealed-region edge: the local RS boundary
/// at q = 2, beta_1 otherwise.
pub fn beta_star_certified(c: f64, q: usize) -> ExtReal {
    if q == 2 {
        beta_rs_loc(c, 2)
    } else {
        beta_1(c, q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: ExtReal = ExtReal::Infinite;

    #[test]
    fn phi2_examples() {
        for q in 2..5 {
            for &(b, kappa) in &[(0.0, 1.0), (0.7, 3.0), (5.0, 10.0)] {
                let v = phi2(b, kappa, q, &OverlapMeasure::uniform(q)).unwrap();
                let want = 2.0 * annealed_pressure_at(q, ExtReal::Finite(b), kappa);
                assert!((v - want).abs() < 1e-12);
            }
        }
        let diag = OverlapMeasure::new(2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let v = phi2(INF, 1.0, 2, &diag).unwrap();
        assert!((v - (2f64.ln() + 0.5 * 0.5f64.ln())).abs() < 1e-15);
        let skew = OverlapMeasure::new(2, vec![0.4, 0.1, 0.1, 0.4]).unwrap();
        assert!(phi2(0.0, 2.0, 2, &skew).unwrap() < 2.0 * 2f64.ln());
    }

    #[test]
    fn mu_kt_examples() {
        for k in 0..=3 {
            assert_eq!(mu_kt(3, k, 1.0).unwrap(), OverlapMeasure::uniform(3));
        }
        assert_eq!(mu_kt(3, 3, 2.2).unwrap(), OverlapMeasure::uniform(3));
        let m = mu_kt(2, 0, 0.0).unwrap();
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.get(1, 0), 0.0);
        assert_eq!(m.get(0, 1), 0.5);
        assert_eq!(m.get(1, 1), 0.5);
        assert!(mu_kt(2, 0, 2.5).is_err());
        assert!(mu_kt(3, 1, 2.0).unwrap().row_sums().iter().all(|r| (r - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn closed_form_matches_general_functional() {
        let v = phi2_kt(INF, 5.0, 3, 0.0, 2.0).unwrap();
        let w = phi2(INF, 5.0, 3, &mu_kt(3, 0, 2.0).unwrap()).unwrap();
        assert!((v - w).abs() < 1e-9, "{v} {w}");
        for q in 2..5 {
            for k in 0..=q {
                for &t in &[0.0, 0.3, 1.0, 1.7, q as f64] {
                    for &b in &[0.4, 2.0] {
                        let v = phi2_kt(b, 3.0, q, k as f64, t).unwrap();
                        let w = phi2(b, 3.0, q, &mu_kt(q, k, t).unwrap()).unwrap();
                        assert!((v - w).abs() < 1e-12, "q={q} k={k} t={t} {v} {w}");
                    }
                }
            }
        }
    }

    #[test]
    fn closed_form_fixed_points() {
        for q in 2..5 {
            let p2 = 2.0 * annealed_pressure_at(q, ExtReal::Finite(1.3), 4.0);
            assert_eq!(phi2_kt(1.3, 4.0, q, 0.7, 1.0).unwrap(), p2);
            assert_eq!(phi2_kt(1.3, 4.0, q, q as f64, 0.2).unwrap(), p2);
        }
    }

    #[test]
    fn rescaling_identity_examples() {
        let r = rescale(INF, 3, 7.0, 1.5);
        assert!((r.c_frak - 7.0).abs() < 1e-15 && (r.k_frak - 1.5).abs() < 1e-15);
        let r = rescale(0.0, 3, 7.0, 1.5);
        assert_eq!(r.c_frak, 0.0);
        let (q, b, c, k) = (3usize, 1.0, 10.0, 1.0);
        let r = rescale(b, q, c, k);
        for i in 0..=30 {
            let t = 3.0 * i as f64 / 30.0;
            let lhs =
                r.multiplier * (phi2_kt(b, c, q, k, t).unwrap() - 2.0 * annealed_pressure_at(q, ExtReal::Finite(b), c));
            let rhs = phi2_kt_gap_at_infinity(r.c_frak, q, r.k_frak, t);
            assert!((lhs - rhs).abs() < 1e-10, "t={t} {lhs} {rhs}");
        }
    }

    #[test]
    fn optimize_examples() {
        let r = optimize(0.0, 5.0, 3).unwrap();
        assert!(r.certified);
        // x^2 q^2 c = q ln q at beta = 1.
        let x = x_param(ExtReal::Finite(1.0), 3);
        let c = 3.0 * 3f64.ln() / (9.0 * x * x);
        let r = optimize(1.0, c, 3).unwrap();
        assert!(r.certified);
        assert_eq!(r.t_star, 1.0);
        let r = optimize(INF, 9.0 * 3f64.ln(), 3).unwrap();
        assert!(!r.certified);
    }

    #[test]
    fn ising_examples() {
        assert_eq!(ising_gap(1.0, 4.0, 0.5).unwrap(), 0.0);
        for i in 0..=20 {
            let th = i as f64 / 20.0;
            assert!(ising_gap(0.0, 4.0, th).unwrap() <= 0.0);
        }
        // Second derivative at 1/2 is 4 (c x^2 - 1).
        let (b, c) = (0.8, 6.0);
        let x = x_param(ExtReal::Finite(b), 2);
        let h = 1e-4;
        let d2 = (ising_gap(b, c, 0.5 + h).unwrap() - 2.0 * ising_gap(b, c, 0.5).unwrap()
            + ising_gap(b, c, 0.5 - h).unwrap())
            / (h * h);
        assert!((d2 - 4.0 * (c * x * x - 1.0)).abs() < 1e-5, "{d2}");
        assert!(ising_gap(1.0, 1.0, 1.2).is_err());
    }

    #[test]
    fn beta_star_examples() {
        assert!((beta_star_certified(9.0, 2).to_f64() - 2f64.ln()).abs() < 1e-14);
        assert!((beta_star_certified(24.0 * 3f64.ln(), 3).to_f64() - 4f64.ln()).abs() < 1e-12);
        assert_eq!(beta_star_certified(6.0 * 3f64.ln(), 3), INF);
        assert_eq!(beta_star_certified(3.0, 3), INF);
    }
}
