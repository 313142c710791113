//! Closed-form annealed quantities and the phase-boundary curves in beta.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// A nonnegative real that may be +infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    Infinite,
}

impl ExtReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ExtReal::Infinite)
    }

    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::Finite(v) => v,
            ExtReal::Infinite => f64::INFINITY,
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        if v == f64::INFINITY {
            ExtReal::Infinite
        } else {
            ExtReal::Finite(v)
        }
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.to_f64().partial_cmp(&other.to_f64())
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => s.serialize_f64(*v),
            ExtReal::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(ExtReal::Finite(v)),
            Raw::Text(s) if s == "inf" => Ok(ExtReal::Infinite),
            Raw::Text(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

/// 1 - e^{-beta}, equal to 1 at beta = inf.
pub fn one_minus_boltzmann(beta: ExtReal) -> f64 {
    match beta {
        ExtReal::Finite(b) => -(-b).exp_m1(),
        ExtReal::Infinite => 1.0,
    }
}

/// x(beta, q) = (1 - e^{-beta}) / (q - 1 + e^{-beta}).
pub fn x_param(beta: ExtReal, q: usize) -> f64 {
    let a = one_minus_boltzmann(beta);
    a / (q as f64 - a)
}

pub fn annealed_pressure_at(q: usize, beta: ExtReal, c: f64) -> f64 {
    let qf = q as f64;
    qf.ln() + 0.5 * c * (-one_minus_boltzmann(beta) / qf).ln_1p()
}

/// ln q + (c/2) ln(1 - (1 - e^{-beta})/q).
pub fn annealed_pressure(params: &ModelParams) -> f64 {
    annealed_pressure_at(params.q, params.beta, params.c)
}

/// Gibbs entropy of the annealed pressure, P - beta dP/dbeta.
pub fn annealed_entropy(q: usize, beta: ExtReal, c: f64) -> f64 {
    let p = annealed_pressure_at(q, beta, c);
    match beta {
        ExtReal::Infinite => p,
        ExtReal::Finite(b) => {
            let e = (-b).exp();
            p + 0.5 * b * c * e / (q as f64 - 1.0 + e)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseThresholds {
    pub c_rs_loc: f64,
    pub c_ent: f64,
    pub c_1: f64,
}

pub fn thresholds(q: usize) -> PhaseThresholds {
    let qf = q as f64;
    PhaseThresholds {
        c_rs_loc: (qf - 1.0) * (qf - 1.0),
        c_ent: 2.0 * qf.ln() / (-1.0 / qf).ln_1p().abs(),
        c_1: 2.0 * qf * qf.ln(),
    }
}

pub fn beta_rs_loc(c: f64, q: usize) -> ExtReal {
    let qf = q as f64;
    if c <= (qf - 1.0) * (qf - 1.0) {
        return ExtReal::Infinite;
    }
    ExtReal::Finite(-(-qf / (1.0 + c.sqrt())).ln_1p())
}

pub fn beta_1(c: f64, q: usize) -> ExtReal {
    if q == 2 {
        return beta_rs_loc(c, q);
    }
    let qf = q as f64;
    let c1 = 2.0 * qf * qf.ln();
    if c <= c1 {
        return ExtReal::Infinite;
    }
    ExtReal::Finite(-(-qf / (qf - 1.0 + (c / c1).sqrt())).ln_1p())
}

/// Negated annealed entropy, h(beta) = -P(beta, c) - (beta c / 2) e^{-beta} / (q - 1 + e^{-beta}).
/// Negative near beta = 0 (h -> -ln q) and positive at large beta iff c > c_ent.
pub fn entropy_residual(beta: f64, c: f64, q: usize) -> f64 {
    -annealed_entropy(q, ExtReal::Finite(beta), c)
}

const ROOT_TOL: f64 = 1e-10;
const BETA_SCAN_START: f64 = 1e-3;
const BETA_SCAN_FACTOR: f64 = 1.5;
const BETA_SCAN_MAX: f64 = 500.0;

/// Smallest beta at which the annealed entropy P - beta dP/dbeta reaches 0:
/// infinite for c <= c_ent, otherwise found by a multiplicative bracketing
/// scan from beta = 1e-3 and bisection.
pub fn beta_ent(c: f64, q: usize) -> Result<ExtReal> {
    if c <= thresholds(q).c_ent {
        return Ok(ExtReal::Infinite);
    }
    let h = |b: f64| entropy_residual(b, c, q);
    let mut lo = BETA_SCAN_START;
    if h(lo) >= 0.0 {
        return Err(Error::RootNotBracketed { upper: BETA_SCAN_MAX });
    }
    let mut hi = lo * BETA_SCAN_FACTOR;
    loop {
        if h(hi) >= 0.0 {
            break;
        }
        if hi >= BETA_SCAN_MAX {
            return Err(Error::RootNotBracketed { upper: BETA_SCAN_MAX });
        }
        lo = hi;
        hi = (hi * BETA_SCAN_FACTOR).min(BETA_SCAN_MAX);
    }
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if h(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ExtReal::Finite(0.5 * (lo + hi)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseLabel {
    AnnealedCertified,
    GapUnknown,
    NonAnnealed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseRegion {
    pub label: PhaseLabel,
    pub beta_lower: ExtReal,
    pub beta_upper: ExtReal,
}

pub fn classify(params: &ModelParams) -> Result<PhaseRegion> {
    let (c, q) = (params.c, params.q);
    let beta_lower = beta_1(c, q);
    let beta_upper = beta_rs_loc(c, q).min(beta_ent(c, q)?);
    let label = if params.beta <= beta_lower {
        PhaseLabel::AnnealedCertified
    } else if params.beta > beta_upper {
        PhaseLabel::NonAnnealed
    } else {
        PhaseLabel::GapUnknown
    };
    Ok(PhaseRegion { label, beta_lower, beta_upper })
}
