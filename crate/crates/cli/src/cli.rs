//! Command-line parsing and dispatch.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args as ClapArgs, Parser, Subcommand};

use crate::commands::{
    convergence_data, convergence_output, emit, error_table_data, error_table_output, moments_report,
    simulate_report, Output,
};
use crate::config::{ExperimentConfig, Overrides, SchemeKind};
use crate::error::Result;
use crate::runner::Runner;

#[derive(Debug, Parser)]
#[command(
    name = "llweak",
    version,
    about = "Weak local linearization experiments for SDEs"
)]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact vs estimated mean and variance at every grid node.
    Moments {
        #[command(flatten)]
        common: Common,
        /// Chain the per-step moment maps instead of sampling (linear SDEs).
        #[arg(long)]
        propagate: bool,
    },
    /// Maximum moment errors and fitted Monte Carlo rates per sample size.
    ErrorTable {
        #[command(flatten)]
        common: Common,
    },
    /// Batch-means error of E|z_N|^2 per scheme and step size.
    Convergence {
        #[command(flatten)]
        common: Common,
    },
    /// Write individual sample paths.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, ClapArgs)]
pub struct Common {
    /// example1, example2, gbm or scalar-stability.
    #[arg(long)]
    pub problem: Option<String>,
    /// Comma-separated for `convergence`.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub scheme: Vec<SchemeKind>,
    /// Step size; comma-separated list for `convergence`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub delta: Vec<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Paths per ensemble (per batch for `convergence`); a list for
    /// `error-table`.
    #[arg(long, value_delimiter = ',')]
    pub samples: Vec<usize>,
    #[arg(long)]
    pub batches: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to $LLWEAK_THREADS, then all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with the same keys as the flags; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write SVG charts next to the CSV.
    #[arg(long)]
    pub emit_plots: bool,
}

impl Common {
    fn resolve(self, propagate: bool) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.apply(Overrides {
            problem: self.problem,
            scheme: self.scheme,
            delta: self.delta,
            t_end: self.t_end,
            samples: self.samples,
            batches: self.batches,
            seed: self.seed,
            threads: self.threads,
            out: self.out,
            emit_plots: self.emit_plots,
            propagate,
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs one command, writing CSV to `cfg.out` or `stdout`. Returns notes
/// for stderr (overflow counts, written chart files).
pub fn run(args: Args, stdout: &mut dyn Write) -> Result<Vec<String>> {
    type Job = fn(&ExperimentConfig, &Runner) -> Result<Output>;
    let (cfg, job): (ExperimentConfig, Job) = match args.command {
        Command::Moments { common, propagate } => (common.resolve(propagate)?, moments_report),
        Command::ErrorTable { common } => (common.resolve(false)?, |c, r| {
            Ok(error_table_output(&error_table_data(c, r)?))
        }),
        Command::Convergence { common } => (common.resolve(false)?, |c, r| {
            Ok(convergence_output(&convergence_data(c, r)?))
        }),
        Command::Simulate { common } => (common.resolve(false)?, simulate_report),
    };
    let runner = Runner::new(cfg.resolved_threads()?)?;
    let output = job(&cfg, &runner)?;
    let charts = emit(&cfg, &output, stdout)?;
    let mut notes = output.notes;
    notes.extend(charts.iter().map(|p| format!("wrote {}", p.display())));
    Ok(notes)
}
