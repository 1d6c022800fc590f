//! Experiment runner for the weak local linearization scheme: Monte Carlo
//! ensembles, error tables, convergence studies, CSV and SVG output.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod runner;
pub mod svg;
pub mod table;

pub use config::{ExperimentConfig, SchemeKind};
pub use error::{Category, CliError};
