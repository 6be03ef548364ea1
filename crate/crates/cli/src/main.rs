use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use probwave_cli::{execute, CliError, Config, Overrides};

/// Run a probability-wave scenario and write its data and report.
#[derive(Debug, Parser)]
#[command(name = "probwave", version)]
struct Args {
    /// free-wave, potential-wave, ensemble, decoherence, entropy,
    /// sturm-liouville, uncertainty, contour, composite or field
    #[arg(long)]
    scenario: Option<String>,
    /// Config file with `key = value` lines and optional sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// csv or json
    #[arg(long)]
    format: Option<String>,
    /// Exit with status 3 when any check fails.
    #[arg(long)]
    check: bool,
}

fn run(args: &Args) -> Result<bool, CliError> {
    let text = match &args.config {
        Some(path) => Some(
            std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?,
        ),
        None => None,
    };
    let overrides = Overrides {
        scenario: args.scenario.clone(),
        output: args.out.clone(),
        seed: args.seed,
        format: args.format.clone(),
    };
    let config = Config::resolve(text.as_deref(), &overrides)?;
    let report = execute(&config)?;
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("check failed: {} = {:e} (threshold {:e})", c.name, c.value, c.threshold);
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) if args.check => ExitCode::from(3),
        Ok(false) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("probwave: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
