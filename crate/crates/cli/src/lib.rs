//! Scenario runner for the probwave library.
//!
//! A run resolves a [`Config`], evaluates one scenario, writes its data
//! tables into the output directory and finishes with `report.json`, which
//! lists every invariant check with its value and threshold.

pub mod config;
pub mod output;
pub mod scenarios;

use std::fmt;
use std::fs;
use std::io;
use std::path::PathBuf;

use serde::Serialize;

pub use config::{Config, Format, Overrides, Params, Scenario};
pub use output::{emit_output, Table};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(probwave::Error),
    Io(io::Error),
}

impl CliError {
    /// 1 for configuration problems, 2 for numerical or I/O failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) | CliError::Io(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(e) => write!(f, "numerical error: {e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<probwave::Error> for CliError {
    fn from(e: probwave::Error) -> Self {
        match e {
            // Bad user input surfaces as a configuration problem.
            probwave::Error::InvalidParameter { .. } | probwave::Error::Parse { .. } => CliError::Config(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Comparison a check applies between its value and threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<")]
    Below,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
}

impl Check {
    /// Passes when |value| ≤ threshold.
    pub fn within(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value.abs() <= threshold,
            value,
            relation: Relation::AtMost,
            threshold,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value >= threshold,
            value,
            relation: Relation::AtLeast,
            threshold,
        }
    }

    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value < threshold,
            value,
            relation: Relation::Below,
            threshold,
        }
    }

    /// A yes/no check recorded as value 1 (true) against threshold 1.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self {
            name: name.into(),
            passed: ok,
            value: if ok { 1.0 } else { 0.0 },
            relation: Relation::AtLeast,
            threshold: 1.0,
        }
    }
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub scenario: Scenario,
    pub seed: u64,
    pub format: Format,
    pub parameters: Params,
    pub files: Vec<String>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Runs the scenario and writes every output file.
pub fn execute(config: &Config) -> Result<Report, CliError> {
    let outcome = scenarios::run_scenario(config)?;
    let mut files = Vec::with_capacity(outcome.tables.len());
    for (stem, table) in &outcome.tables {
        let path = emit_output(table, config.format, &config.output, stem)?;
        files.push(
            path.file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default(),
        );
    }
    let report = Report {
        scenario: config.scenario,
        seed: config.seed,
        format: config.format,
        parameters: config.params.clone(),
        files,
        passed: outcome.checks.iter().all(|c| c.passed),
        checks: outcome.checks,
    };
    let mut text = serde_json::to_string_pretty(&report).map_err(io::Error::from)?;
    text.push('\n');
    fs::write(report_path(config), text)?;
    Ok(report)
}

pub fn report_path(config: &Config) -> PathBuf {
    config.output.join("report.json")
}
