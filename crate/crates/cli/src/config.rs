//! Scenario configuration: a flat `key = value` file with optional
//! one-level sections, overridden by command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use toml::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    FreeWave,
    PotentialWave,
    Ensemble,
    Decoherence,
    Entropy,
    SturmLiouville,
    Uncertainty,
    Contour,
    Composite,
    Field,
}

impl Scenario {
    pub const ALL: [Scenario; 10] = [
        Scenario::FreeWave,
        Scenario::PotentialWave,
        Scenario::Ensemble,
        Scenario::Decoherence,
        Scenario::Entropy,
        Scenario::SturmLiouville,
        Scenario::Uncertainty,
        Scenario::Contour,
        Scenario::Composite,
        Scenario::Field,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::FreeWave => "free-wave",
            Scenario::PotentialWave => "potential-wave",
            Scenario::Ensemble => "ensemble",
            Scenario::Decoherence => "decoherence",
            Scenario::Entropy => "entropy",
            Scenario::SturmLiouville => "sturm-liouville",
            Scenario::Uncertainty => "uncertainty",
            Scenario::Contour => "contour",
            Scenario::Composite => "composite",
            Scenario::Field => "field",
        }
    }

    /// Parameter keys the scenario understands.
    pub fn keys(self) -> &'static [&'static str] {
        match self {
            Scenario::FreeWave => &[
                "v", "rate", "times", "x_min", "x_max", "n", "mp_x", "hbar", "mass", "kb",
            ],
            Scenario::PotentialWave => &[
                "v0",
                "accel",
                "energy",
                "x_start",
                "x_end",
                "samples",
                "rate",
                "times",
                "n",
                "mp_x",
                "potential_table",
                "k_table",
                "hbar",
                "mass",
                "kb",
            ],
            Scenario::Ensemble => &[
                "weights", "n_trials", "workers", "speeds", "mp_x", "record", "hbar", "mass", "kb",
            ],
            Scenario::Decoherence => &["weights", "speeds", "rates", "times", "hbar", "mass", "kb"],
            Scenario::Entropy => &["v", "t_max", "steps", "measured_at", "hbar", "mass", "kb"],
            Scenario::SturmLiouville => &[
                "x0", "x_end", "k0", "v0", "v_slope", "n_eigen", "n_grid", "oracle_n", "hbar", "mass", "kb",
            ],
            Scenario::Uncertainty => &[
                "n",
                "sigma_re",
                "sigma_im",
                "correlation",
                "mean_re",
                "mean_im",
                "dx_imag",
                "dp_imag",
                "hbar",
            ],
            Scenario::Contour => &[
                "v", "rate", "t_re", "t_im", "density", "path", "lower", "upper", "refine", "hbar", "mass", "kb",
            ],
            Scenario::Composite => &[
                "weights",
                "system_speeds",
                "pointer_speeds",
                "system_rates",
                "pointer_rates",
                "mp_x",
                "outcome",
                "h",
                "hbar",
                "mass",
                "kb",
            ],
            Scenario::Field => &["v", "s_max", "n", "x_max", "times", "hbar", "mass", "kb"],
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s.trim())
            .ok_or_else(|| CliError::Config(format!("unknown scenario `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(CliError::Config(format!("unknown format `{other}`"))),
        }
    }
}

/// Typed view over the scenario parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Params(BTreeMap<String, Value>);

fn type_error(key: &str, expected: &str, found: &Value) -> CliError {
    CliError::Config(format!("`{key}` should be {expected}, found {found}"))
}

fn as_f64(key: &str, v: &Value) -> Result<f64, CliError> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(type_error(key, "a number", other)),
    }
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.0.insert(key.to_string(), value.into());
        self
    }

    pub fn contains(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.0.iter()
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64, CliError> {
        self.opt_f64(key).map(|v| v.unwrap_or(default))
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.0.get(key).map(|v| as_f64(key, v)).transpose()
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize, CliError> {
        self.opt_usize(key).map(|v| v.unwrap_or(default))
    }

    pub fn opt_usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(other) => Err(type_error(key, "a non-negative integer", other)),
        }
    }

    pub fn bool(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.0.get(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(other) => Err(type_error(key, "true or false", other)),
        }
    }

    pub fn string(&self, key: &str) -> Result<Option<String>, CliError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(other) => Err(type_error(key, "a string", other)),
        }
    }

    pub fn f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        Ok(self.opt_f64_list(key)?.unwrap_or_else(|| default.to_vec()))
    }

    pub fn opt_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items.iter().map(|v| as_f64(key, v)).collect::<Result<_, _>>().map(Some),
            Some(other) => Err(type_error(key, "an array of numbers", other)),
        }
    }
}

/// A fully resolved run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub scenario: Scenario,
    pub params: Params,
    pub seed: u64,
    pub output: PathBuf,
    pub format: Format,
}

/// Values given on the command line; they win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub scenario: Option<String>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub format: Option<String>,
}

const RESERVED: [&str; 4] = ["scenario", "seed", "output", "format"];

impl Config {
    pub fn new(scenario: Scenario, params: Params, seed: u64, output: impl Into<PathBuf>, format: Format) -> Self {
        Self {
            scenario,
            params,
            seed,
            output: output.into(),
            format,
        }
    }

    /// Resolves a config file (possibly absent) against command-line overrides.
    ///
    /// Top-level keys other than `scenario`, `seed`, `output` and `format` are
    /// parameters. A section named after the scenario (or `[parameters]`)
    /// adds to them; sections for other scenarios are ignored.
    pub fn resolve(text: Option<&str>, overrides: &Overrides) -> Result<Self, CliError> {
        let table: toml::Table = match text {
            Some(t) => t
                .parse()
                .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?,
            None => toml::Table::new(),
        };
        let file_str = |key: &str| -> Result<Option<String>, CliError> {
            match table.get(key) {
                None => Ok(None),
                Some(Value::String(s)) => Ok(Some(s.clone())),
                Some(other) => Err(type_error(key, "a string", other)),
            }
        };
        let scenario: Scenario = match overrides.scenario.clone().or(file_str("scenario")?) {
            Some(s) => s.parse()?,
            None => return Err(CliError::Config("no scenario given".into())),
        };
        let seed = match (overrides.seed, table.get("seed")) {
            (Some(s), _) => s,
            (None, None) => 0,
            (None, Some(Value::Integer(i))) if *i >= 0 => *i as u64,
            (None, Some(other)) => return Err(type_error("seed", "a non-negative integer", other)),
        };
        let format = match overrides.format.clone().or(file_str("format")?) {
            Some(f) => f.parse()?,
            None => Format::Csv,
        };
        let output = overrides
            .output
            .clone()
            .or(file_str("output")?.map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("probwave-out"));

        let mut params = Params::new();
        let sections: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).chain(["parameters"]).collect();
        for (key, value) in &table {
            match value {
                Value::Table(inner) => {
                    if !sections.contains(&key.as_str()) {
                        return Err(CliError::Config(format!("unknown section [{key}]")));
                    }
                    if key == scenario.name() || key == "parameters" {
                        for (k, v) in inner {
                            if matches!(v, Value::Table(_)) {
                                return Err(CliError::Config(format!("section [{key}] nests `{k}`")));
                            }
                            params.0.insert(k.clone(), v.clone());
                        }
                    }
                }
                _ if RESERVED.contains(&key.as_str()) => {}
                _ => {
                    params.0.entry(key.clone()).or_insert_with(|| value.clone());
                }
            }
        }
        let known = scenario.keys();
        if let Some(bad) = params.0.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(CliError::Config(format!(
                "`{bad}` is not a parameter of {scenario}; expected one of {}",
                known.join(", ")
            )));
        }
        Ok(Config {
            scenario,
            params,
            seed,
            output,
            format,
        })
    }
}
