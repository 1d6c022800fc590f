use alloc::vec;
use alloc::vec::Vec;

use super::dist::student_t_quantile;
use crate::linalg::Matrix;
use crate::sde::Moments;
use crate::{Error, Result};

/// Running per-node sums over an ensemble of paths: `Σ z`, `Σ z zᵀ` and
/// `Σ arctan(1 + z_l²)` for each component `l`.
///
/// Merging accumulators is plain addition, so a fixed merge order gives
/// bit-identical results regardless of how paths were split across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator {
    dim: usize,
    nodes: usize,
    count: usize,
    sum: Vec<f64>,
    sum_outer: Vec<f64>,
    sum_arctan: Vec<f64>,
}

impl MomentAccumulator {
    pub fn new(dim: usize, nodes: usize) -> Self {
        Self {
            dim,
            nodes,
            count: 0,
            sum: vec![0.0; nodes * dim],
            sum_outer: vec![0.0; nodes * dim * dim],
            sum_arctan: vec![0.0; nodes * dim],
        }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Adds a whole path `z_0..=z_{nodes-1}`.
    pub fn add_path(&mut self, path: &[Vec<f64>]) {
        assert_eq!(path.len(), self.nodes, "path length must match node count");
        for (n, z) in path.iter().enumerate() {
            self.add_state(n, z);
        }
        self.count += 1;
    }

    /// Adds one state at node `n`. Call [`MomentAccumulator::finish_path`]
    /// once every node of the path has been added.
    pub fn add_state(&mut self, n: usize, z: &[f64]) {
        let d = self.dim;
        let base = n * d;
        let outer = n * d * d;
        for i in 0..d {
            self.sum[base + i] += z[i];
            self.sum_arctan[base + i] += libm::atan(1.0 + z[i] * z[i]);
            for j in 0..d {
                self.sum_outer[outer + i * d + j] += z[i] * z[j];
            }
        }
    }

    pub fn finish_path(&mut self) {
        self.count += 1;
    }

    pub fn merge(&mut self, other: &MomentAccumulator) {
        assert_eq!((self.dim, self.nodes), (other.dim, other.nodes));
        self.count += other.count;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_outer.iter_mut().zip(&other.sum_outer) {
            *a += b;
        }
        for (a, b) in self.sum_arctan.iter_mut().zip(&other.sum_arctan) {
            *a += b;
        }
    }

    pub fn finish(&self) -> Result<EnsembleMoments> {
        if self.count == 0 {
            return Err(Error::NotEnoughData {
                what: "ensemble",
                needed: 1,
                got: 0,
            });
        }
        let d = self.dim;
        let inv = 1.0 / self.count as f64;
        let mut nodes = Vec::with_capacity(self.nodes);
        let mut arctan = Vec::with_capacity(self.nodes);
        for n in 0..self.nodes {
            let mean: Vec<f64> = self.sum[n * d..(n + 1) * d].iter().map(|s| s * inv).collect();
            let second = Matrix::from_fn(d, d, |i, j| self.sum_outer[n * d * d + i * d + j] * inv);
            let variance = second.sub(&Matrix::outer(&mean, &mean));
            nodes.push(NodeEstimate {
                mean,
                second,
                variance,
            });
            arctan.push(
                self.sum_arctan[n * d..(n + 1) * d]
                    .iter()
                    .map(|s| s * inv)
                    .collect(),
            );
        }
        Ok(EnsembleMoments {
            count: self.count,
            nodes,
            arctan,
        })
    }
}

/// Sample moments at one node. `variance` is `second - mean meanᵀ` (the
/// `1/M` estimator).
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEstimate {
    pub mean: Vec<f64>,
    pub second: Matrix,
    pub variance: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMoments {
    pub count: usize,
    pub nodes: Vec<NodeEstimate>,
    /// `(1/M) Σ arctan(1 + (z_l)²)` per node and component.
    pub arctan: Vec<Vec<f64>>,
}

/// Sample mean, second moment and variance of states at a single node.
pub fn estimate_moments(samples: &[Vec<f64>]) -> Result<NodeEstimate> {
    let first = samples.first().ok_or(Error::NotEnoughData {
        what: "ensemble",
        needed: 1,
        got: 0,
    })?;
    let mut acc = MomentAccumulator::new(first.len(), 1);
    for z in samples {
        acc.add_state(0, z);
        acc.finish_path();
    }
    Ok(acc.finish()?.nodes.swap_remove(0))
}

/// Number of error statistics for dimension `d`: `d` mean components, `d`
/// variance diagonals and `d(d-1)/2` covariances (5 when `d = 2`).
pub fn error_count(d: usize) -> usize {
    2 * d + d * (d - 1) / 2
}

/// Absolute errors `|exact - estimate|` at one node, ordered as mean
/// components, variance diagonal, then upper-triangular covariances.
pub fn node_errors(mean: &[f64], variance: &Matrix, exact: &Moments) -> Vec<f64> {
    let d = mean.len();
    let exact_var = exact.covariance();
    let mut out = Vec::with_capacity(error_count(d));
    out.extend(exact.mean.iter().zip(mean).map(|(e, m)| libm::fabs(e - m)));
    for i in 0..d {
        out.push(libm::fabs(exact_var[(i, i)] - variance[(i, i)]));
    }
    for i in 0..d {
        for j in i + 1..d {
            out.push(libm::fabs(exact_var[(i, j)] - variance[(i, j)]));
        }
    }
    out
}

/// Per-node errors and their maxima over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    /// `per_node[n][l]`.
    pub per_node: Vec<Vec<f64>>,
    /// `max_n per_node[n][l]`.
    pub max: Vec<f64>,
}

pub fn error_table(estimate: &EnsembleMoments, exact: &[Moments]) -> Result<ErrorTable> {
    if estimate.nodes.len() != exact.len() {
        return Err(Error::Grid(
            "estimate and exact curves have different node counts",
        ));
    }
    let per_node: Vec<Vec<f64>> = estimate
        .nodes
        .iter()
        .zip(exact)
        .map(|(e, x)| node_errors(&e.mean, &e.variance, x))
        .collect();
    let stats = per_node.first().map_or(0, Vec::len);
    let max = (0..stats)
        .map(|l| per_node.iter().map(|row| row[l]).fold(0.0, f64::max))
        .collect();
    Ok(ErrorTable { per_node, max })
}

/// Least-squares slope of `(x, y)` points; `None` with fewer than 2 distinct `x`.
pub fn slope_fit(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Average Monte Carlo convergence rate over grid nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaFit {
    pub mean: f64,
    /// Sample standard deviation over nodes (`n - 1` denominator); zero for a
    /// single node.
    pub std: f64,
    pub nodes_used: usize,
    /// `(M, e)` points dropped because `e` was not positive.
    pub excluded_points: usize,
}

/// `gamma_n = -slope` of `log2 e_n(M)` against `log2 M`, averaged over nodes.
///
/// `errors[k][n]` is the error at node `n` for sample size `sample_sizes[k]`.
/// Non-positive errors are skipped; nodes with fewer than two usable points
/// are left out of the average.
pub fn fit_gamma(sample_sizes: &[usize], errors: &[Vec<f64>]) -> Result<GammaFit> {
    if sample_sizes.len() != errors.len() {
        return Err(Error::Length {
            op: "fit_gamma",
            expected: sample_sizes.len(),
            got: errors.len(),
        });
    }
    let nodes = errors.first().map_or(0, Vec::len);
    let mut gammas = Vec::with_capacity(nodes);
    let mut excluded = 0;
    let mut points = Vec::with_capacity(sample_sizes.len());
    for n in 0..nodes {
        points.clear();
        for (m, row) in sample_sizes.iter().zip(errors) {
            let e = row[n];
            if e > 0.0 && e.is_finite() {
                points.push((libm::log2(*m as f64), libm::log2(e)));
            } else {
                excluded += 1;
            }
        }
        if let Some(slope) = slope_fit(&points) {
            gammas.push(-slope);
        }
    }
    if gammas.is_empty() {
        return Err(Error::NotEnoughData {
            what: "fit_gamma usable points per node",
            needed: 2,
            got: 0,
        });
    }
    let k = gammas.len() as f64;
    let mean = gammas.iter().sum::<f64>() / k;
    let std = if gammas.len() > 1 {
        libm::sqrt(gammas.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / (k - 1.0))
    } else {
        0.0
    };
    Ok(GammaFit {
        mean,
        std,
        nodes_used: gammas.len(),
        excluded_points: excluded,
    })
}

/// Batch-means estimate of a mean error with a Student-t confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    /// `sqrt(var_batch / K)`.
    pub std_error: f64,
    /// `t_{1-alpha/2, K-1} * std_error`.
    pub half_width: f64,
    pub batches: usize,
    pub batch_size: usize,
    pub overflow_count: usize,
}

/// Mean error `(1/K) Σ_j e_j` over batch errors `e_j` with a two-sided
/// `100(1 - alpha)%` Student-t interval on `K - 1` degrees of freedom.
pub fn functional_error(
    batch_errors: &[f64],
    alpha: f64,
    batch_size: usize,
    overflow_count: usize,
) -> Result<McEstimate> {
    let k = batch_errors.len();
    if k < 2 {
        return Err(Error::NotEnoughData {
            what: "batches",
            needed: 2,
            got: k,
        });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument("alpha must lie in (0, 1)"));
    }
    let kf = k as f64;
    let value = batch_errors.iter().sum::<f64>() / kf;
    let var = batch_errors
        .iter()
        .map(|e| (e - value) * (e - value))
        .sum::<f64>()
        / (kf - 1.0);
    let (std_error, half_width) = if var > 0.0 {
        let se = libm::sqrt(var / kf);
        (se, student_t_quantile(1.0 - 0.5 * alpha, kf - 1.0) * se)
    } else {
        (0.0, 0.0)
    };
    Ok(McEstimate {
        value,
        std_error,
        half_width,
        batches: k,
        batch_size,
        overflow_count,
    })
}

/// `max_n |(h̄_n - ĥ_n) / h̄_n|` for `h = E arctan(1 + (X^l)²)`, with `h̄`
/// from the reference ensemble and `ĥ` from the scheme.
pub fn arctan_functional_error(
    reference: &EnsembleMoments,
    estimate: &EnsembleMoments,
    component: usize,
) -> Result<f64> {
    if reference.arctan.len() != estimate.arctan.len() {
        return Err(Error::Grid("ensembles have different node counts"));
    }
    Ok(reference
        .arctan
        .iter()
        .zip(&estimate.arctan)
        .map(|(r, e)| libm::fabs((r[component] - e[component]) / r[component]))
        .fold(0.0, f64::max))
}
