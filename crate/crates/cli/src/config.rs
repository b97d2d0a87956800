//! Run-configuration documents: line-oriented `key = value` text.
//!
//! Recognized keys: `epsilon`, `nu`, `lambda`, `tau`, `n_cells`, `t_end`
//! (all required), and optional `init_case`, `seed`, `output_dir`,
//! `diag_every`, `snapshot_every`, `startup`. Unknown keys and duplicate
//! keys are errors; blank lines and `#` comments are allowed.

use chns_core::scheme::Params;
use std::collections::HashMap;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    MalformedLine { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key {key:?} (first set on line {first})")]
    DuplicateKey {
        line: usize,
        first: usize,
        key: String,
    },
    #[error("missing required key {key:?}")]
    MissingKey { key: &'static str },
    #[error("line {line}: {key} has malformed value {value:?}")]
    MalformedValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("line {line}: {key} must be positive, got {value}")]
    NonPositive {
        line: usize,
        key: String,
        value: f64,
    },
    #[error("line {line}: n_cells must be at least 2, got {value}")]
    GridTooSmall { line: usize, value: usize },
    #[error("line {line}: diag_every must be at least 1")]
    BadDiagEvery { line: usize },
}

/// How to build the initial state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitCase {
    /// `0.1 cos(pi x) cos(pi y) + 0.05 cos(2 pi x) cos(3 pi y)` at cell
    /// centers, zero velocity.
    DefaultSmooth,
    /// `phi = 1`, zero velocity: an exact fixed point.
    Equilibrium,
    /// Seeded random phase values and a random solenoidal velocity.
    Random { seed: u64 },
    /// Resume from a checkpoint file.
    FromSnapshot(PathBuf),
}

/// First-step handling: the two-level scheme needs a fictitious level -1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Startup {
    /// Copy level 0 into level -1 (the reference choice).
    CopyLevel,
    /// Take one first-order step before switching to the two-level scheme.
    FirstOrderStep,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: Params,
    pub init_case: InitCase,
    pub output_dir: PathBuf,
    pub diag_every: u64,
    /// 0 = never write snapshots.
    pub snapshot_every: u64,
    pub startup: Startup,
}

const KEYS: [&str; 12] = [
    "epsilon",
    "nu",
    "lambda",
    "tau",
    "n_cells",
    "t_end",
    "init_case",
    "seed",
    "output_dir",
    "diag_every",
    "snapshot_every",
    "startup",
];

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse().map_err(|_| ConfigError::MalformedValue {
        line,
        key: key.to_string(),
        value: value.to_string(),
    })
}

fn parse_u64(line: usize, key: &str, value: &str) -> Result<u64, ConfigError> {
    value.parse().map_err(|_| ConfigError::MalformedValue {
        line,
        key: key.to_string(),
        value: value.to_string(),
    })
}

fn positive(line: usize, key: &str, value: f64) -> Result<f64, ConfigError> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(ConfigError::NonPositive {
            line,
            key: key.to_string(),
            value,
        })
    }
}

/// Parse and fully validate a configuration document (fail-closed).
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut seen: HashMap<String, (usize, String)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(ConfigError::MalformedLine {
                line,
                text: raw.to_string(),
            });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey { line, key });
        }
        if let Some((first, _)) = seen.get(&key) {
            return Err(ConfigError::DuplicateKey {
                line,
                first: *first,
                key,
            });
        }
        seen.insert(key, (line, value));
    }

    let require = |key: &'static str| -> Result<(usize, String), ConfigError> {
        seen.get(key)
            .cloned()
            .ok_or(ConfigError::MissingKey { key })
    };

    let (l, v) = require("epsilon")?;
    let epsilon = positive(l, "epsilon", parse_f64(l, "epsilon", &v)?)?;
    let (l, v) = require("nu")?;
    let nu = positive(l, "nu", parse_f64(l, "nu", &v)?)?;
    let (l, v) = require("lambda")?;
    let lambda = positive(l, "lambda", parse_f64(l, "lambda", &v)?)?;
    let (l, v) = require("tau")?;
    let tau = positive(l, "tau", parse_f64(l, "tau", &v)?)?;
    let (l, v) = require("t_end")?;
    let t_end = positive(l, "t_end", parse_f64(l, "t_end", &v)?)?;
    let (l, v) = require("n_cells")?;
    let n_cells: usize = v.parse().map_err(|_| ConfigError::MalformedValue {
        line: l,
        key: "n_cells".into(),
        value: v.clone(),
    })?;
    if n_cells < 2 {
        return Err(ConfigError::GridTooSmall {
            line: l,
            value: n_cells,
        });
    }

    let params = Params::new(epsilon, nu, lambda, tau, n_cells, t_end)
        .expect("field-level validation already done");

    let seed = match seen.get("seed") {
        Some((l, v)) => parse_u64(*l, "seed", v)?,
        None => 0,
    };

    let init_case = match seen.get("init_case") {
        None => InitCase::DefaultSmooth,
        Some((l, v)) => match v.as_str() {
            "default_smooth" => InitCase::DefaultSmooth,
            "equilibrium" => InitCase::Equilibrium,
            "random" => InitCase::Random { seed },
            other => {
                if let Some(path) = other.strip_prefix("from_snapshot:") {
                    InitCase::FromSnapshot(PathBuf::from(path.trim()))
                } else {
                    return Err(ConfigError::MalformedValue {
                        line: *l,
                        key: "init_case".into(),
                        value: v.clone(),
                    });
                }
            }
        },
    };

    let output_dir = match seen.get("output_dir") {
        Some((_, v)) => PathBuf::from(v),
        None => PathBuf::from("."),
    };

    let diag_every = match seen.get("diag_every") {
        Some((l, v)) => {
            let d = parse_u64(*l, "diag_every", v)?;
            if d == 0 {
                return Err(ConfigError::BadDiagEvery { line: *l });
            }
            d
        }
        None => 1,
    };

    let snapshot_every = match seen.get("snapshot_every") {
        Some((l, v)) => parse_u64(*l, "snapshot_every", v)?,
        None => 0,
    };

    let startup = match seen.get("startup") {
        None => Startup::CopyLevel,
        Some((l, v)) => match v.as_str() {
            "copy_level" => Startup::CopyLevel,
            "first_order_step" => Startup::FirstOrderStep,
            _ => {
                return Err(ConfigError::MalformedValue {
                    line: *l,
                    key: "startup".into(),
                    value: v.clone(),
                })
            }
        },
    };

    Ok(RunConfig {
        params,
        init_case,
        output_dir,
        diag_every,
        snapshot_every,
        startup,
    })
}
