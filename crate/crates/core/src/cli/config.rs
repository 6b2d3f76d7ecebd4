//! Flat `key = value` experiment configs.
//!
//! ```text
//! # equicorrelated normal, Simes boundary
//! family = normal
//! n = 10
//! alpha = 0.05
//! rho = 0.5
//! seed = 42
//! ```
//!
//! Recognized keys: `family`, `n`, `k`, `alpha`, `rho`, `matrix` (path to a
//! correlation matrix file, relative to the config), `nu`, `reps`, `seed`,
//! `side`, `mode`, `boundary` (comma or space separated constants), `tol`,
//! `workers`. Unknown and repeated keys are errors.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use crate::dependence::CorrelationMatrix;
use crate::samplers::Family;
use crate::verify::{BoundaryMode, Correlation, ExperimentConfig, Side, DEFAULT_REPS, DEFAULT_TOL};
use crate::{Error, Result};

const KEYS: &[&str] = &[
    "family", "n", "k", "alpha", "rho", "matrix", "nu", "reps", "seed", "side", "mode", "boundary",
    "tol", "workers",
];

struct Entry {
    value: String,
    line: usize,
}

struct Parser<'a> {
    label: &'a str,
    base: Option<&'a Path>,
    entries: HashMap<&'static str, Entry>,
    last_line: usize,
}

impl Parser<'_> {
    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Config {
            path: self.label.to_string(),
            line,
            message: message.into(),
        }
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(self.last_line, |e| e.line)
    }

    fn get<T: FromStr>(&self, key: &str, expected: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|_| {
                self.err(
                    e.line,
                    format!("{key}: expected {expected}, got '{}'", e.value),
                )
            }),
        }
    }

    fn required<T: FromStr>(&self, key: &str, expected: &str) -> Result<T> {
        self.get(key, expected)?
            .ok_or_else(|| self.err(self.last_line, format!("missing required key '{key}'")))
    }

    fn with_line<T>(&self, key: &str, r: Result<T>) -> Result<T> {
        r.map_err(|e| self.err(self.line_of(key), e.to_string()))
    }

    fn float_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        e.value
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    self.err(
                        e.line,
                        format!("{key}: expected a list of numbers, got '{s}'"),
                    )
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

/// Parses config text; `label` names the source in errors and `base` is the
/// directory that relative matrix paths are resolved against.
pub fn parse_config_str(text: &str, label: &str, base: Option<&Path>) -> Result<ExperimentConfig> {
    let mut p = Parser {
        label,
        base,
        entries: HashMap::new(),
        last_line: text.lines().count().max(1),
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(p.err(line, format!("expected 'key = value', got '{content}'")));
        };
        let key = key.trim();
        let value = value.trim();
        let Some(&known) = KEYS.iter().find(|&&k| k == key) else {
            return Err(p.err(line, format!("unknown key '{key}'")));
        };
        if value.is_empty() {
            return Err(p.err(line, format!("{key}: missing value")));
        }
        if let Some(prev) = p.entries.get(known) {
            return Err(p.err(
                line,
                format!("duplicate key '{key}' on lines {} and {line}", prev.line),
            ));
        }
        p.entries.insert(
            known,
            Entry {
                value: value.to_string(),
                line,
            },
        );
    }
    build(&p)
}

fn build(p: &Parser) -> Result<ExperimentConfig> {
    let family_name: String = p.required("family", "a family name")?;
    let family = p.with_line("family", Family::parse(&family_name))?;
    let n: usize = p.required("n", "a positive integer")?;
    let alpha: f64 = p.required("alpha", "a number")?;
    let seed: u64 = p.required("seed", "a nonnegative integer")?;
    let k: usize = p.get("k", "a positive integer")?.unwrap_or(1);
    let nu: Option<u32> = p.get("nu", "a positive integer")?;
    let reps: u64 = p.get("reps", "a positive integer")?.unwrap_or(DEFAULT_REPS);
    let tol: f64 = p.get("tol", "a number")?.unwrap_or(DEFAULT_TOL);
    let workers: Option<usize> = p.get("workers", "a positive integer")?;
    let side = match p.get::<String>("side", "a side")? {
        Some(s) => p.with_line("side", Side::parse(&s))?,
        None => Side::default(),
    };
    let mode = match p.get::<String>("mode", "a mode")? {
        Some(s) => p.with_line("mode", BoundaryMode::parse(&s))?,
        None => BoundaryMode::default(),
    };
    let boundary = p.float_list("boundary")?;

    let correlation = match (p.entries.get("rho"), p.entries.get("matrix")) {
        (Some(r), Some(m)) => {
            return Err(p.err(
                m.line,
                format!(
                    "rho (line {}) and matrix (line {}) are exclusive",
                    r.line, m.line
                ),
            ))
        }
        (Some(_), None) => {
            let rho: f64 = p.required("rho", "a number")?;
            if !(-1.0..=1.0).contains(&rho) {
                return Err(p.err(p.line_of("rho"), format!("rho = {rho} is outside [-1, 1]")));
            }
            Correlation::Equicorrelated { rho }
        }
        (None, Some(m)) => {
            let path = match p.base {
                Some(dir) => dir.join(&m.value),
                None => Path::new(&m.value).to_path_buf(),
            };
            let sigma = p.with_line("matrix", CorrelationMatrix::read(&path))?;
            Correlation::Matrix {
                path: Some(m.value.clone()),
                rows: sigma.rows(),
            }
        }
        (None, None) => Correlation::default(),
    };

    let config = ExperimentConfig {
        family,
        n,
        k,
        alpha,
        correlation,
        nu,
        reps,
        seed,
        side,
        mode,
        boundary,
        tol,
        workers,
    };
    config.validate().map_err(|e| {
        let key = match &e {
            Error::Range { name, .. } => *name,
            Error::LengthMismatch { .. } if p.entries.contains_key("boundary") => "boundary",
            Error::LengthMismatch { .. } => "matrix",
            Error::InvalidModel(m) if m.contains("nu") => "nu",
            Error::InvalidModel(m) if m.contains("side") => "side",
            Error::InvalidModel(_) => "mode",
            _ => "family",
        };
        p.err(p.line_of(key), e.to_string())
    })?;
    Ok(config)
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, &path.display().to_string(), path.parent())
}
