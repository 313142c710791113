mod args;
mod commands;
mod error;
mod output;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use args::{config_to_args, Cli, Format};
use error::{CliError, CliResult};
use output::{from_json, to_json, Fields, SCHEMA};

const THREADS_VAR: &str = "POTTS_AF_THREADS";

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| CliError::Usage(e.to_string()))
}

/// Resolves --config into a full argument list; command-line --out and
/// --format take precedence over the file.
fn resolve(cli: Cli) -> CliResult<Cli> {
    let Some(path) = cli.config.clone() else {
        return Ok(cli);
    };
    let text =
        std::fs::read_to_string(&path).map_err(|e| CliError::Config { path: path.clone(), reason: e.to_string() })?;
    let doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config { path: path.clone(), reason: e.to_string() })?;
    let argv = config_to_args(&doc).map_err(|reason| CliError::Config { path: path.clone(), reason })?;
    let mut resolved =
        Cli::try_parse_from(argv).map_err(|e| CliError::Config { path, reason: e.to_string().trim().to_string() })?;
    resolved.out = cli.out.or(resolved.out);
    resolved.format = cli.format.or(resolved.format);
    Ok(resolved)
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
    }
}

fn execute(cli: &Cli) -> CliResult<String> {
    let cmd = cli.command.as_ref().ok_or_else(|| CliError::Usage("a subcommand or --config is required".into()))?;
    let config = serde_json::to_value(cmd).map_err(|e| CliError::Usage(e.to_string()))?;
    let report = commands::run(cmd, from_json(&config))?;
    // Table commands default to CSV, the rest to JSON.
    let default = if report.columns.is_empty() { Format::Json } else { Format::Csv };
    match cli.format.unwrap_or(default) {
        Format::Json => report.render_json(),
        Format::Csv => report.render_csv(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.out.clone();
    let outcome = configure_threads().and_then(|_| resolve(cli)).and_then(|cli| {
        let text = execute(&cli)?;
        emit(cli.out.as_deref(), &text)
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let record = Fields::default()
                .put("schema", SCHEMA)
                .put("error", Fields::default().put("kind", err.kind()).put("message", err.to_string().as_str()));
            let text = to_json(&record.into()).unwrap_or_else(|_| format!("{err}\n"));
            eprint!("{text}");
            if let Some(path) = out {
                let _ = std::fs::write(path, &text);
            }
            ExitCode::from(2)
        }
    }
}
