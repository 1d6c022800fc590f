//! Parallel trajectory ensembles.
//!
//! Trajectory `i` of an ensemble always draws from stream
//! `(tag << 40) | i` of the master seed, and work is split into fixed
//! chunks whose partial sums are merged in chunk order. Results are
//! therefore bit-identical for any thread count.

use llweak::baselines::EulerScheme;
use llweak::montecarlo::{EnsembleMoments, MomentAccumulator, RngStream};
use llweak::problems::{ExactSampler, NamedProblem};
use llweak::scheme::{LlScheme, Stepper};
use llweak::{Error, SdeProblem, TimeGrid};
use rayon::prelude::*;

use crate::config::SchemeKind;
use crate::error::{CliError, Result};

/// Trajectories per unit of parallel work.
pub const CHUNK: usize = 64;

/// Stream tag roles. Ensembles with different roles or slots never share
/// random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Exact-solution reference ensemble.
    Reference = 1,
    Llweak = 2,
    Euler = 3,
    /// The half-step Euler run of a Romberg pair.
    EulerFine = 4,
}

impl Role {
    pub fn for_scheme(kind: SchemeKind) -> Self {
        match kind {
            SchemeKind::Llweak => Role::Llweak,
            SchemeKind::Euler | SchemeKind::EulerRomberg => Role::Euler,
            SchemeKind::Exact => Role::Reference,
        }
    }
}

/// `slot` separates ensembles of the same role, e.g. one per sample size.
pub fn stream_tag(role: Role, slot: usize) -> u64 {
    ((role as u64) << 16) | slot as u64
}

fn stream_id(tag: u64, index: usize) -> u64 {
    (tag << 40) | index as u64
}

pub struct Runner {
    pool: rayon::ThreadPool,
}

impl Runner {
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| CliError::Config(format!("cannot start {threads} worker threads: {e}")))?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// Runs `job(0..jobs)` on the pool; results come back in job order.
    fn jobs<T, F>(&self, jobs: usize, job: F) -> Result<Vec<T>, Error>
    where
        T: Send,
        F: Fn(usize) -> Result<T, Error> + Sync,
    {
        self.pool
            .install(|| (0..jobs).into_par_iter().map(&job).collect())
    }
}

/// One way of producing a path on a grid.
pub enum Kernel<'a> {
    Ll(LlScheme<'a, dyn SdeProblem + 'a>),
    Euler(EulerScheme<'a, dyn SdeProblem + 'a>),
    Exact(&'a dyn ExactSampler),
}

impl<'a> Kernel<'a> {
    /// `EulerRomberg` maps to plain Euler; the extrapolation happens on
    /// batch means.
    pub fn new(problem: &'a NamedProblem, kind: SchemeKind, grid: &'a TimeGrid) -> Result<Self> {
        let p = problem.problem();
        Ok(match kind {
            SchemeKind::Llweak => Kernel::Ll(LlScheme::new(p, grid)?),
            SchemeKind::Euler | SchemeKind::EulerRomberg => Kernel::Euler(EulerScheme::new(p, grid)),
            SchemeKind::Exact => Kernel::Exact(problem.exact_sampler().ok_or_else(|| {
                CliError::Unsupported(format!("problem {} has no exact sampler", problem.name()))
            })?),
        })
    }

    /// Fills `path` with `z_0..=z_N`. Returns `false` if the state
    /// overflowed, leaving `path` truncated.
    pub fn run(
        &self,
        grid: &TimeGrid,
        x0: &[f64],
        rng: &mut RngStream,
        path: &mut Vec<Vec<f64>>,
    ) -> Result<bool, Error> {
        path.clear();
        path.push(x0.to_vec());
        match self {
            Kernel::Ll(s) => Self::run_stepper(s, grid, rng, path),
            Kernel::Euler(s) => Self::run_stepper(s, grid, rng, path),
            Kernel::Exact(sampler) => {
                let mut w = vec![0.0; sampler.wiener_dim()];
                for n in 0..grid.steps() {
                    let sqrt_h = grid.step(n).1.sqrt();
                    for wk in w.iter_mut() {
                        *wk += sqrt_h * rng.standard_normal();
                    }
                    path.push(sampler.sample(grid.nodes()[n + 1], &w));
                }
                Ok(true)
            }
        }
    }

    fn run_stepper(
        s: &dyn Stepper,
        grid: &TimeGrid,
        rng: &mut RngStream,
        path: &mut Vec<Vec<f64>>,
    ) -> Result<bool, Error> {
        let mut eta = vec![0.0; s.noise_dim()];
        for n in 0..grid.steps() {
            rng.fill_two_point(&mut eta);
            match s.step(n, &path[n], &eta) {
                Ok(z) => path.push(z),
                Err(Error::Overflow { .. }) => return Ok(false),
                Err(e) => return Err(e),
            }
        }
        Ok(true)
    }
}

/// Where and how an ensemble draws its randomness.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleSpec {
    pub seed: u64,
    pub tag: u64,
}

/// Per-node moments of `count` paths plus the number that overflowed.
pub fn ensemble_moments(
    runner: &Runner,
    kernel: &Kernel<'_>,
    grid: &TimeGrid,
    x0: &[f64],
    count: usize,
    spec: EnsembleSpec,
) -> Result<(EnsembleMoments, usize)> {
    let d = x0.len();
    let nodes = grid.steps() + 1;
    let parts = runner.jobs(count.div_ceil(CHUNK), |c| {
        let mut acc = MomentAccumulator::new(d, nodes);
        let mut overflow = 0;
        let mut path = Vec::with_capacity(nodes);
        for i in c * CHUNK..((c + 1) * CHUNK).min(count) {
            let mut rng = RngStream::new(spec.seed, stream_id(spec.tag, i));
            if kernel.run(grid, x0, &mut rng, &mut path)? {
                acc.add_path(&path);
            } else {
                overflow += 1;
            }
        }
        Ok((acc, overflow))
    })?;
    let mut total = MomentAccumulator::new(d, nodes);
    let mut overflow = 0;
    for (acc, o) in &parts {
        total.merge(acc);
        overflow += o;
    }
    Ok((total.finish()?, overflow))
}

/// Sum of a terminal functional over one batch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BatchSum {
    pub sum: f64,
    pub completed: usize,
    pub overflowed: usize,
}

impl BatchSum {
    /// Mean over completed paths; `None` if every path overflowed.
    pub fn mean(&self) -> Option<f64> {
        (self.completed > 0).then(|| self.sum / self.completed as f64)
    }
}

/// `batches` batches of `batch_size` paths; trajectory `j * batch_size + i`
/// is path `i` of batch `j`.
#[allow(clippy::too_many_arguments)]
pub fn terminal_batches(
    runner: &Runner,
    kernel: &Kernel<'_>,
    grid: &TimeGrid,
    x0: &[f64],
    batches: usize,
    batch_size: usize,
    spec: EnsembleSpec,
    phi: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<Vec<BatchSum>> {
    let per_batch = batch_size.div_ceil(CHUNK);
    let parts = runner.jobs(batches * per_batch, |job| {
        let (j, c) = (job / per_batch, job % per_batch);
        let mut out = BatchSum::default();
        let mut path = Vec::with_capacity(grid.steps() + 1);
        for i in c * CHUNK..((c + 1) * CHUNK).min(batch_size) {
            let index = j * batch_size + i;
            let mut rng = RngStream::new(spec.seed, stream_id(spec.tag, index));
            if kernel.run(grid, x0, &mut rng, &mut path)? {
                out.sum += phi(path.last().expect("path holds x0"));
                out.completed += 1;
            } else {
                out.overflowed += 1;
            }
        }
        Ok(out)
    })?;
    Ok(parts
        .chunks(per_batch)
        .map(|chunk| {
            chunk.iter().fold(BatchSum::default(), |a, b| BatchSum {
                sum: a.sum + b.sum,
                completed: a.completed + b.completed,
                overflowed: a.overflowed + b.overflowed,
            })
        })
        .collect())
}

/// Independent sample paths for `simulate`; overflowed paths are truncated.
pub fn sample_paths(
    runner: &Runner,
    kernel: &Kernel<'_>,
    grid: &TimeGrid,
    x0: &[f64],
    count: usize,
    spec: EnsembleSpec,
) -> Result<Vec<(Vec<Vec<f64>>, bool)>> {
    Ok(runner.jobs(count, |i| {
        let mut rng = RngStream::new(spec.seed, stream_id(spec.tag, i));
        let mut path = Vec::new();
        let done = kernel.run(grid, x0, &mut rng, &mut path)?;
        Ok((path, done))
    })?)
}
