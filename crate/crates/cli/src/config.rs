//! Run configuration: a flat dotted-key text file plus flag overrides.
//!
//! The file format is one `key = value` pair per line, `#` starts a comment,
//! blank lines are ignored. Unknown keys are rejected rather than skipped so
//! a typo cannot silently fall back to a default. Command-line flags win
//! over file values.

use std::fmt;
use std::path::{Path, PathBuf};

/// Everything a run needs, with defaults suitable for the bundled cusp
/// family.
#[derive(Clone, Debug)]
pub struct RunConfig {
    /// Registry name of the map family.
    pub family: String,
    /// Parameter value(s): single-valued commands require exactly one
    /// entry; the audit treats the whole list as its sample set.
    pub epsilon: Vec<f64>,
    /// Cells in the uniform collocation grid.
    pub grid_n: usize,
    /// Refine certificate quadratures near the support edge.
    pub refine_near_ae: bool,
    /// L¹ residual accepted for invariant-density solves.
    pub tol_fixed_point: f64,
    /// Relative term tolerance for the resolvent series.
    pub tol_resolvent: f64,
    /// Parameter sweep for the finite-difference validation and the branch
    /// continuity table (strictly decreasing where required).
    pub eps_list: Vec<f64>,
    /// Seed for orbit sampling.
    pub seed: u64,
    /// Directory receiving CSV/JSON/SVG artifacts.
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            family: "cusp-tent-example".to_string(),
            epsilon: vec![0.0],
            grid_n: 2048,
            refine_near_ae: true,
            tol_fixed_point: 1e-10,
            tol_resolvent: 1e-8,
            eps_list: vec![0.04, 0.02, 0.01, 0.005],
            seed: 42,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// A configuration problem: bad file syntax, unknown key, or an invalid
/// value. Always maps to exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn parse_reals(raw: &str, key: &str) -> Result<Vec<f64>, ConfigError> {
    let values: Result<Vec<f64>, _> = raw
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect();
    match values {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(ConfigError(format!(
            "{key}: expected a comma-separated list of reals, got {raw:?}"
        ))),
    }
}

fn parse_bool(raw: &str, key: &str) -> Result<bool, ConfigError> {
    match raw.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(ConfigError(format!("{key}: expected a flag, got {other:?}"))),
    }
}

impl RunConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "family" => self.family = value.to_string(),
            "epsilon" => self.epsilon = parse_reals(value, key)?,
            "grid.n" => {
                self.grid_n = value
                    .parse()
                    .map_err(|_| ConfigError(format!("grid.n: expected an integer, got {value:?}")))?
            }
            "grid.refine_near_ae" => self.refine_near_ae = parse_bool(value, key)?,
            "tol.fixed_point" => {
                self.tol_fixed_point = value.parse().map_err(|_| {
                    ConfigError(format!("tol.fixed_point: expected a real, got {value:?}"))
                })?
            }
            "tol.resolvent" => {
                self.tol_resolvent = value.parse().map_err(|_| {
                    ConfigError(format!("tol.resolvent: expected a real, got {value:?}"))
                })?
            }
            "eps_list" => self.eps_list = parse_reals(value, key)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| ConfigError(format!("seed: expected an integer, got {value:?}")))?
            }
            "output_dir" => self.output_dir = PathBuf::from(value),
            unknown => {
                return Err(ConfigError(format!("unknown key {unknown:?}")));
            }
        }
        Ok(())
    }

    /// Reads a config file over the defaults.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let mut config = RunConfig::default();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError(format!(
                    "{}:{}: expected `key = value`, got {line:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            config.set(key.trim(), value)?;
        }
        Ok(config)
    }

    /// Structural checks that do not need the family: positive tolerances
    /// and a nonempty parameter list.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.tol_fixed_point > 0.0) {
            return Err(ConfigError(format!(
                "tol.fixed_point must be positive, got {}",
                self.tol_fixed_point
            )));
        }
        if !(self.tol_resolvent > 0.0) {
            return Err(ConfigError(format!(
                "tol.resolvent must be positive, got {}",
                self.tol_resolvent
            )));
        }
        if self.epsilon.is_empty() {
            return Err(ConfigError("epsilon: at least one value required".to_string()));
        }
        Ok(())
    }

    /// The single parameter value required by one-parameter commands.
    pub fn single_epsilon(&self) -> Result<f64, ConfigError> {
        match self.epsilon.as_slice() {
            [eps] => Ok(*eps),
            list => Err(ConfigError(format!(
                "this command needs exactly one epsilon, got {list:?}"
            ))),
        }
    }
}
