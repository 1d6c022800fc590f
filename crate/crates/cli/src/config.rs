//! Experiment configuration: a JSON file mirroring the command-line flags,
//! with flags taking precedence.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use llweak::problems::NamedProblem;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{CliError, Result};

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "LLWEAK_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Llweak,
    Euler,
    EulerRomberg,
    Exact,
}

impl SchemeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::Llweak => "llweak",
            SchemeKind::Euler => "euler",
            SchemeKind::EulerRomberg => "euler-romberg",
            SchemeKind::Exact => "exact",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: String,
    #[serde(deserialize_with = "one_or_many")]
    pub scheme: Vec<SchemeKind>,
    #[serde(deserialize_with = "one_or_many")]
    pub delta: Vec<f64>,
    pub t_end: Option<f64>,
    #[serde(deserialize_with = "one_or_many")]
    pub samples: Vec<usize>,
    pub batches: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub emit_plots: bool,
    /// `moments` only: chain the exact per-step moment maps instead of
    /// sampling.
    pub propagate: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: "example1".into(),
            scheme: vec![SchemeKind::Llweak],
            delta: vec![1.0 / 64.0],
            t_end: None,
            samples: vec![1024],
            batches: 10,
            seed: 1,
            threads: None,
            out: None,
            emit_plots: false,
            propagate: false,
        }
    }
}

fn one_or_many<'de, D, T>(de: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(match OneOrMany::deserialize(de)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

/// Flag values; `None` / empty means "not given on the command line".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub problem: Option<String>,
    pub scheme: Vec<SchemeKind>,
    pub delta: Vec<f64>,
    pub t_end: Option<f64>,
    pub samples: Vec<usize>,
    pub batches: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub emit_plots: bool,
    pub propagate: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| CliError::ConfigFile {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&text, path)
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(p) = o.problem {
            self.problem = p;
        }
        if !o.scheme.is_empty() {
            self.scheme = o.scheme;
        }
        if !o.delta.is_empty() {
            self.delta = o.delta;
        }
        if o.t_end.is_some() {
            self.t_end = o.t_end;
        }
        if !o.samples.is_empty() {
            self.samples = o.samples;
        }
        if let Some(k) = o.batches {
            self.batches = k;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if o.threads.is_some() {
            self.threads = o.threads;
        }
        if o.out.is_some() {
            self.out = o.out;
        }
        self.emit_plots |= o.emit_plots;
        self.propagate |= o.propagate;
    }

    pub fn validate(&self) -> Result<()> {
        if NamedProblem::from_name(&self.problem).is_none() {
            return Err(CliError::Config(format!(
                "unknown problem {:?}; expected one of {}",
                self.problem,
                NamedProblem::NAMES.join(", ")
            )));
        }
        if self.scheme.is_empty() {
            return Err(CliError::Config("no scheme given".into()));
        }
        if self.delta.is_empty() || self.delta.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(CliError::Config("every delta must be positive and finite".into()));
        }
        if let Some(t) = self.t_end {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::Config("t_end must be positive and finite".into()));
            }
        }
        if self.samples.is_empty() || self.samples.contains(&0) {
            return Err(CliError::Config("samples must be at least 1".into()));
        }
        if self.batches == 0 {
            return Err(CliError::Config("batches must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        if self.emit_plots && self.out.is_none() {
            return Err(CliError::Config(
                "--emit-plots needs --out to place the SVG files".into(),
            ));
        }
        Ok(())
    }

    /// The problem with `t_end` applied.
    pub fn named_problem(&self) -> Result<NamedProblem> {
        let p = NamedProblem::from_name(&self.problem)
            .ok_or_else(|| CliError::Config(format!("unknown problem {:?}", self.problem)))?;
        Ok(match self.t_end {
            Some(t) => p.with_t_end(t),
            None => p,
        })
    }

    /// `--threads`, then `LLWEAK_THREADS`, then the machine's parallelism.
    pub fn resolved_threads(&self) -> Result<usize> {
        if let Some(t) = self.threads {
            return Ok(t);
        }
        if let Ok(v) = std::env::var(THREADS_ENV) {
            return match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(CliError::Config(format!(
                    "{THREADS_ENV}={v:?} is not a positive integer"
                ))),
            };
        }
        Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}
