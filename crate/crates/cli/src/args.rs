use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use potts_af::cascade::Level;
use potts_af::ExtReal;
use serde::{Serialize, Serializer};

#[derive(Debug, Parser)]
#[command(
    name = "potts-af",
    version,
    about = "Antiferromagnetic Potts model on sparse random graphs: pressures, bounds and certificates"
)]
pub struct Cli {
    /// JSON run configuration: {"command": "...", "<flag-name>": value, ...}.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Inverse temperature flag: a nonnegative number or "inf".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beta(pub ExtReal);

impl Serialize for Beta {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

fn parse_beta(s: &str) -> Result<Beta, String> {
    match s.trim() {
        "inf" | "infinity" => Ok(Beta(ExtReal::Infinite)),
        t => t.parse::<f64>().map_err(|e| e.to_string()).and_then(|v| {
            if v.is_infinite() && v > 0.0 {
                Ok(Beta(ExtReal::Infinite))
            } else if v.is_finite() {
                Ok(Beta(ExtReal::Finite(v)))
            } else {
                Err(format!("invalid inverse temperature {s}"))
            }
        }),
    }
}

/// Cascade level: 0 and 1 are the m -> 0 and m -> 1 limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelArg(pub Level);

impl Serialize for LevelArg {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0.order())
    }
}

fn parse_level(s: &str) -> Result<LevelArg, String> {
    match s.trim() {
        "to-zero" => Ok(LevelArg(Level::ToZero)),
        "to-one" => Ok(LevelArg(Level::ToOne)),
        t => {
            let v: f64 = t.parse().map_err(|e: std::num::ParseFloatError| e.to_string())?;
            Ok(LevelArg(if v == 0.0 {
                Level::ToZero
            } else if v == 1.0 {
                Level::ToOne
            } else {
                Level::Value(v)
            }))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PressureMethod {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HierarchyArg {
    Uniform,
    SymmetricT,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorArg {
    Exact,
    Sampled,
    Cascade,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(untagged)]
pub enum Command {
    /// Threshold curves over a connectivity range (CSV columns c, beta_1, beta_rs_loc, beta_ent, beta_upper).
    PhaseDiagram {
        #[arg(long)]
        q: usize,
        #[arg(long, default_value_t = 0.0)]
        c_min: f64,
        #[arg(long, default_value_t = 20.0)]
        c_max: f64,
        #[arg(long, default_value_t = 0.5)]
        c_step: f64,
    },
    /// Finite-N quenched pressure against the annealed pressure.
    Pressure {
        #[arg(long)]
        q: usize,
        #[arg(long, value_parser = parse_beta)]
        beta: Beta,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = PressureMethod::Exact)]
        method: PressureMethod,
        /// Monte Carlo draws (mc) or stratified draws above the enumerated range (exact).
        #[arg(long, default_value_t = 40_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
    },
    /// Replica-symmetric bound over the polarization grid.
    RsScan {
        #[arg(long)]
        q: usize,
        #[arg(long, value_parser = parse_beta)]
        beta: Beta,
        #[arg(long)]
        c: f64,
        #[arg(long, default_value_t = 201)]
        t_points: usize,
        #[arg(long, default_value_t = 1e-10)]
        eps: f64,
    },
    /// Second-moment optimizer over the restricted overlap family.
    SecondMoment {
        #[arg(long)]
        q: usize,
        #[arg(long, value_parser = parse_beta)]
        beta: Beta,
        #[arg(long)]
        c: f64,
    },
    /// Overlap sum rule against the direct annealed gap.
    SumRule {
        #[arg(long)]
        q: usize,
        #[arg(long, value_parser = parse_beta)]
        beta: Beta,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        r_max: usize,
        #[arg(long, default_value_t = 16)]
        quad_points: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Cavity bound for a cascade trial state.
    Cascade {
        #[arg(long)]
        q: usize,
        #[arg(long, value_parser = parse_beta)]
        beta: Beta,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        n: usize,
        /// Level parameters, increasing; 0 and 1 select the m -> 0 and m -> 1 limits.
        #[arg(long, value_parser = parse_level, value_delimiter = ',', default_value = "1")]
        levels: Vec<LevelArg>,
        #[arg(long, value_enum, default_value_t = HierarchyArg::Uniform)]
        hierarchy: HierarchyArg,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        #[arg(long, value_enum, default_value_t = EstimatorArg::Exact)]
        estimator: EstimatorArg,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Atoms per cascade node (cascade estimator).
        #[arg(long, default_value_t = 64)]
        atoms: usize,
        #[arg(long, default_value_t = 1e-10)]
        eps: f64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::PhaseDiagram { .. } => "phase-diagram",
            Command::Pressure { .. } => "pressure",
            Command::RsScan { .. } => "rs-scan",
            Command::SecondMoment { .. } => "second-moment",
            Command::SumRule { .. } => "sum-rule",
            Command::Cascade { .. } => "cascade",
        }
    }
}

/// Arguments equivalent to a JSON config object.
pub fn config_to_args(doc: &serde_json::Value) -> Result<Vec<String>, String> {
    let obj = doc.as_object().ok_or("config must be a JSON object")?;
    let command = obj.get("command").and_then(|v| v.as_str()).ok_or("config needs a \"command\" string")?;
    let mut args = vec!["potts-af".to_string(), command.to_string()];
    for (key, value) in obj {
        if key == "command" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        let text = match value {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Number(n) => n.to_string(),
            serde_json::Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    serde_json::Value::String(s) => Ok(s.clone()),
                    serde_json::Value::Number(n) => Ok(n.to_string()),
                    _ => Err(format!("unsupported list item in {key}")),
                })
                .collect::<Result<Vec<_>, _>>()?
                .join(","),
            _ => return Err(format!("unsupported value for {key}")),
        };
        args.push(flag);
        args.push(text);
    }
    Ok(args)
}
