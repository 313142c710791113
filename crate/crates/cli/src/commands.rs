use potts_af::bounds::{annealed_pressure, beta_1, beta_ent, beta_rs_loc, thresholds, x_param};
use potts_af::cascade::{rsb_upper_bound, CascadeSpec, Estimator, Hierarchy, SpinHierarchySpec};
use potts_af::disorder::{
    quenched_pressure_exact, quenched_pressure_mc, quenched_pressure_report, sum_rule_deficit, Method,
    QuenchedEstimate, QuenchedOptions,
};
use potts_af::replica_symmetric::{instability, rs_bound, t_grid};
use potts_af::second_moment::{beta_star_certified, optimize, rescale};
use potts_af::{Error, ModelParams};

use crate::args::{Command, EstimatorArg, HierarchyArg, PressureMethod};
use crate::error::{CliError, CliResult};
use crate::output::{Fields, Report, Value};

/// Pressures are compared against exact p_N only up to this size.
const COMPARE_MAX_N: usize = 8;

fn estimate(e: &QuenchedEstimate) -> Value {
    Fields::default()
        .put("value", e.value)
        .put("stat_error", e.stat_error)
        .put("tail_bound", e.tail_bound)
        .put("samples", e.samples)
        .put(
            "method",
            match e.method {
                Method::ExactConditional => "exact-conditional",
                Method::MonteCarlo => "monte-carlo",
            },
        )
        .into()
}

pub fn run(cmd: &Command, config: Value) -> CliResult<Report> {
    let mut report = Report::new(cmd.name(), config);
    match *cmd {
        Command::PhaseDiagram { q, c_min, c_max, c_step } => {
            if !(c_step > 0.0 && c_min >= 0.0 && c_max >= c_min && c_min.is_finite() && c_max.is_finite()) {
                return Err(CliError::Usage(format!("bad range [{c_min}, {c_max}] step {c_step}")));
            }
            if q < 2 {
                return Err(Error::InvalidParameter(format!("q must be at least 2, got {q}")).into());
            }
            let th = thresholds(q);
            report.header = Fields::default().put("c_rs_loc", th.c_rs_loc).put("c_ent", th.c_ent).put("c_1", th.c_1);
            report.columns = vec!["c", "beta_1", "beta_rs_loc", "beta_ent", "beta_upper"];
            let count = ((c_max - c_min) / c_step + 1e-9).floor() as usize + 1;
            for i in 0..count {
                let c = c_min + i as f64 * c_step;
                let (b1, rs, ent) = (beta_1(c, q), beta_rs_loc(c, q), beta_ent(c, q)?);
                report.rows.push(vec![c.into(), b1.into(), rs.into(), ent.into(), rs.min(ent).into()]);
            }
        }
        Command::Pressure { q, beta, c, n, method, samples, seed, eps } => {
            let params = ModelParams::new(q, beta.0, c)?;
            let annealed = annealed_pressure(&params);
            let mut result = Fields::default();
            let est = match method {
                PressureMethod::Exact => {
                    let opts = QuenchedOptions { seed, mc_samples: samples, ..Default::default() };
                    let r = quenched_pressure_report(&params, n, eps, &opts)?;
                    result = result.put("exact_edges", r.exact_edges).put("max_edges", r.max_edges);
                    r.estimate
                }
                PressureMethod::Mc => quenched_pressure_mc(&params, n, samples, seed)?,
            };
            report.result = Fields::default()
                .put("pressure", estimate(&est))
                .put("annealed", annealed)
                .put("gap", annealed - est.value);
            report.result.0.extend(result.0);
        }
        Command::RsScan { q, beta, c, t_points, eps } => {
            let params = ModelParams::new(q, beta.0, c)?;
            if t_points < 2 {
                return Err(CliError::Usage("t_points must be at least 2".into()));
            }
            report.columns = vec!["t", "g1", "g2", "gap", "rs_bound", "tail_bound"];
            let mut best = (f64::INFINITY, 0.0);
            for t in t_grid(q, t_points) {
                let e = rs_bound(params.beta, c, q, t, eps)?;
                if e.rs_bound < best.0 {
                    best = (e.rs_bound, t);
                }
                report.rows.push(vec![
                    t.into(),
                    e.g1.into(),
                    e.g2.into(),
                    e.gap.into(),
                    e.rs_bound.into(),
                    e.tail_bound.into(),
                ]);
            }
            report.result = Fields::default()
                .put("annealed", annealed_pressure(&params))
                .put("min_rs_bound", best.0)
                .put("t_at_min", best.1)
                .put("instability", instability(params.beta, c, q));
        }
        Command::SecondMoment { q, beta, c } => {
            let params = ModelParams::new(q, beta.0, c)?;
            let r = optimize(params.beta, c, q)?;
            let scaled = rescale(params.beta, q, c, r.k_star);
            let x = x_param(params.beta, q);
            let qf = q as f64;
            report.result = Fields::default()
                .put("t_star", r.t_star)
                .put("k_star", r.k_star)
                .put("max_gap", r.max_gap)
                .put("certified", r.certified)
                .put("c_frak", scaled.c_frak)
                .put("k_frak", scaled.k_frak)
                .put("multiplier", scaled.multiplier)
                .put("x2q2c", x * x * qf * qf * c)
                .put("guarantee_edge", 2.0 * qf * qf.ln())
                .put("beta_star_certified", beta_star_certified(c, q));
        }
        Command::SumRule { q, beta, c, n, r_max, quad_points, seed } => {
            let params = ModelParams::new(q, beta.0, c)?;
            let deficit = sum_rule_deficit(&params, n, r_max, quad_points, seed)?;
            let opts = QuenchedOptions { seed, ..Default::default() };
            let p_n = quenched_pressure_report(&params, n, 1e-8, &opts)?.estimate;
            let direct = annealed_pressure(&params) - p_n.value;
            let budget = deficit.error_budget() + 4.0 * deficit.estimate.stat_error + p_n.error_budget(4.0);
            report.result = Fields::default()
                .put("deficit", estimate(&deficit.estimate))
                .put("quadrature_error", deficit.quadrature_error)
                .put("r_truncation", deficit.r_truncation)
                .put("k_truncation", deficit.k_truncation)
                .put("p_n", estimate(&p_n))
                .put("direct_gap", direct)
                .put("discrepancy", (deficit.estimate.value - direct).abs())
                .put("error_budget", budget);
        }
        Command::Cascade { q, beta, c, n, ref levels, hierarchy, t, estimator, samples, seed, atoms, eps } => {
            let params = ModelParams::new(q, beta.0, c)?;
            let spec = CascadeSpec::new(levels.iter().map(|l| l.0).collect())?;
            let kind = match hierarchy {
                HierarchyArg::Uniform => Hierarchy::Uniform,
                HierarchyArg::SymmetricT => Hierarchy::SymmetricT { t },
            };
            let hier = SpinHierarchySpec::new(kind, q)?;
            let est = match estimator {
                EstimatorArg::Exact => Estimator::Exact { eps },
                EstimatorArg::Sampled => Estimator::Sampled { samples, seed },
                EstimatorArg::Cascade => Estimator::Cascade { samples, seed, atoms_per_level: atoms },
            };
            let one = potts_af::cascade::cavity_g1(&params, n, &spec, &hier, est)?;
            let two = potts_af::cascade::cavity_g2(&params, n, &spec, &hier, est)?;
            let bound = rsb_upper_bound(&params, n, &spec, &hier, est)?;
            let exact = if n <= COMPARE_MAX_N && params.beta.finite().is_some() {
                match quenched_pressure_exact(&params, n, 1e-6) {
                    Ok(e) => Some(e),
                    Err(Error::BudgetExceeded { .. }) => None,
                    Err(e) => return Err(e.into()),
                }
            } else {
                None
            };
            report.result = Fields::default()
                .put("g1", estimate(&one))
                .put("g2", estimate(&two))
                .put("bound", estimate(&bound))
                .put("annealed", annealed_pressure(&params))
                .put("p_n", exact.as_ref().map_or(Value::Null, estimate))
                .put("bound_minus_p_n", exact.map(|e| bound.value - e.value));
        }
    }
    Ok(report)
}
