//! TOML run configuration.
//!
//! ```toml
//! users = 2
//! antennas = 5
//! alpha_s = 4
//! alpha_x = 4
//! snr_grid_db = [0, 5, 10]
//! methods = ["QMSEP-BnB", "QMSEP-UQ"]   # or: method = "QMSEP-BnB"
//! trials = 500                           # channel realizations
//! symbols_per_channel = 20
//! noise_draws_per_symbol = 1
//! seed = 1
//! qos = [0.01, 0.01]                     # optional, B&B methods only
//! execution = "parallel"                 # or "sequential"
//! output = "ser.csv"                     # optional, stdout otherwise
//! format = "csv"
//! verbosity = 1                          # 0 quiet, 1 summary, 2 per point
//! ```
//!
//! Unknown keys are rejected. Error messages name the offending line.

use std::fmt;
use std::path::PathBuf;

use serde::Deserialize;

use msep::objectives::Criterion;
use msep::par::Execution;
use msep::sim::{ExperimentConfig, Method};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    users: usize,
    antennas: usize,
    alpha_s: usize,
    alpha_x: usize,
    snr_grid_db: Vec<f64>,
    method: Option<String>,
    methods: Option<Vec<String>>,
    #[serde(default = "default_trials")]
    trials: usize,
    #[serde(default = "default_symbols")]
    symbols_per_channel: usize,
    #[serde(default = "one")]
    noise_draws_per_symbol: usize,
    #[serde(default)]
    seed: u64,
    qos: Option<Vec<f64>>,
    execution: Option<String>,
    output: Option<PathBuf>,
    #[serde(default = "default_format")]
    format: String,
    #[serde(default = "one_u8")]
    verbosity: u8,
}

fn default_trials() -> usize {
    500
}

fn default_symbols() -> usize {
    20
}

fn one() -> usize {
    1
}

fn one_u8() -> u8 {
    1
}

fn default_format() -> String {
    "csv".into()
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    /// Layout shared by all methods; its `method` is `methods[0]`.
    pub experiment: ExperimentConfig,
    pub methods: Vec<Method>,
    pub output: Option<PathBuf>,
    pub verbosity: u8,
}

/// Configuration error, anchored to a line of the file when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line of the first `key = ...` assignment.
fn key_line(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

pub fn parse_run_config(text: &str) -> Result<RunPlan, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError {
        line: e.span().map(|s| line_of_offset(text, s.start)),
        message: e.message().trim().to_string(),
    })?;
    let err = |key: &str, message: String| ConfigError { line: key_line(text, key), message };

    let names = match (&raw.method, &raw.methods) {
        (Some(m), None) => vec![m.clone()],
        (None, Some(ms)) if !ms.is_empty() => ms.clone(),
        (None, Some(_)) => return Err(err("methods", "`methods` must not be empty".into())),
        (None, None) => return Err(err("users", "one of `method` or `methods` is required".into())),
        (Some(_), Some(_)) => return Err(err("methods", "give either `method` or `methods`, not both".into())),
    };
    let key = if raw.method.is_some() { "method" } else { "methods" };
    let mut methods = Vec::with_capacity(names.len());
    for n in &names {
        let m: Method = n.parse().map_err(|_| err(key, format!("unknown method `{n}`")))?;
        if methods.contains(&m) {
            return Err(err(key, format!("method `{n}` listed twice")));
        }
        if m.criterion() == Some(Criterion::Qmsep) && raw.alpha_s != 4 {
            return Err(err(key, format!("`{n}` needs QPSK data symbols (alpha_s = 4)")));
        }
        methods.push(m);
    }

    for (k, v) in [
        ("users", raw.users),
        ("antennas", raw.antennas),
        ("trials", raw.trials),
        ("symbols_per_channel", raw.symbols_per_channel),
        ("noise_draws_per_symbol", raw.noise_draws_per_symbol),
    ] {
        if v == 0 {
            return Err(err(k, format!("`{k}` must be at least 1")));
        }
    }
    for (k, v) in [("alpha_s", raw.alpha_s), ("alpha_x", raw.alpha_x)] {
        if v < 2 {
            return Err(err(k, format!("`{k}` must be at least 2")));
        }
    }
    if raw.snr_grid_db.is_empty() || raw.snr_grid_db.iter().any(|s| !s.is_finite()) {
        return Err(err("snr_grid_db", "`snr_grid_db` must be a non-empty list of finite numbers".into()));
    }
    if let Some(q) = &raw.qos {
        if q.len() != raw.users {
            return Err(err("qos", format!("`qos` has {} entries for {} users", q.len(), raw.users)));
        }
        if q.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
            return Err(err("qos", "`qos` targets must lie in (0, 1]".into()));
        }
    }
    let execution = match &raw.execution {
        None => Execution::default(),
        Some(s) => s.parse().map_err(|_| err("execution", format!("unknown execution `{s}`")))?,
    };
    if raw.format != "csv" {
        return Err(err("format", format!("unsupported format `{}` (only `csv`)", raw.format)));
    }
    if raw.verbosity > 2 {
        return Err(err("verbosity", "`verbosity` must be 0, 1 or 2".into()));
    }

    let experiment = ExperimentConfig {
        users: raw.users,
        antennas: raw.antennas,
        alpha_s: raw.alpha_s,
        alpha_x: raw.alpha_x,
        snr_grid_db: raw.snr_grid_db,
        trials: raw.trials,
        symbols_per_channel: raw.symbols_per_channel,
        noise_draws_per_symbol: raw.noise_draws_per_symbol,
        seed: raw.seed,
        method: methods[0],
        qos: raw.qos,
        execution,
    };
    experiment.validate().map_err(|e| ConfigError { line: None, message: e.to_string() })?;
    Ok(RunPlan { experiment, methods, output: raw.output, verbosity: raw.verbosity })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "users = 2\nantennas = 4\nalpha_s = 4\nalpha_x = 4\nsnr_grid_db = [0, 10]\nmethod = \"QMSEP-UQ\"\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let p = parse_run_config(MINIMAL).unwrap();
        assert_eq!(p.methods, vec!["QMSEP-UQ".parse::<Method>().unwrap()]);
        assert_eq!(p.experiment.trials, 500);
        assert_eq!(p.experiment.symbols_per_channel, 20);
        assert_eq!(p.experiment.noise_draws_per_symbol, 1);
        assert_eq!(p.experiment.seed, 0);
        assert_eq!(p.verbosity, 1);
        assert_eq!(p.output, None);
    }

    #[test]
    fn unknown_key_is_named_with_its_line() {
        let e = parse_run_config(&format!("{MINIMAL}colour = \"red\"\n")).unwrap_err();
        assert_eq!(e.line, Some(7));
        assert!(e.message.contains("colour"), "{e}");
    }

    #[test]
    fn semantic_errors_point_at_their_key() {
        let e = parse_run_config(&MINIMAL.replace("antennas = 4", "antennas = 0")).unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = parse_run_config(&MINIMAL.replace("QMSEP-UQ", "QMSEP-Magic")).unwrap_err();
        assert_eq!(e.line, Some(6));
        assert!(e.to_string().starts_with("line 6: unknown method"));
        let e = parse_run_config(&MINIMAL.replace("alpha_s = 4", "alpha_s = 8")).unwrap_err();
        assert_eq!(e.line, Some(6));
        let e = parse_run_config(&format!("{MINIMAL}qos = [0.1]\n")).unwrap_err();
        assert_eq!(e.line, Some(7));
        let e = parse_run_config(&MINIMAL.replace("[0, 10]", "[]")).unwrap_err();
        assert_eq!(e.line, Some(5));
    }

    #[test]
    fn method_and_methods_are_exclusive() {
        assert!(parse_run_config(&format!("{MINIMAL}methods = [\"Random\"]\n")).is_err());
        let both = MINIMAL.replace("method = \"QMSEP-UQ\"", "methods = [\"Random\", \"MMDDT-Exhaustive\"]");
        assert_eq!(parse_run_config(&both).unwrap().methods.len(), 2);
        assert!(parse_run_config(&MINIMAL.replace("method = \"QMSEP-UQ\"", "methods = []")).is_err());
        assert!(parse_run_config(&MINIMAL.replace("method = \"QMSEP-UQ\"", "")).is_err());
    }

    #[test]
    fn type_errors_are_line_anchored() {
        let e = parse_run_config(&MINIMAL.replace("users = 2", "users = \"two\"")).unwrap_err();
        assert_eq!(e.line, Some(1));
    }
}
