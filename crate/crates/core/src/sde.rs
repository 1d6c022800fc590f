//! Itô SDEs `dX = f(t,X) dt + Σ_k g^k(t,X) dW^k` and their per-step
//! local linearization.
//!
//! Coefficient index `k = 0` is the drift `f` (with `W^0_s = s`), and
//! `k = 1..=m` are the diffusion columns. Every per-coefficient array in this
//! crate uses that layout. Coefficients are assumed smooth with at most
//! polynomial growth, bounded derivatives and linear growth of `g^k`.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::{Error, Result};

/// First two moments of a `d`-dimensional random vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: Vec<f64>,
    /// `E[X Xᵀ]`.
    pub second: Matrix,
}

impl Moments {
    /// `E[X Xᵀ] - E[X] E[X]ᵀ`.
    pub fn covariance(&self) -> Matrix {
        self.second.sub(&Matrix::outer(&self.mean, &self.mean))
    }

    /// `E|X|²`.
    pub fn mean_square(&self) -> f64 {
        self.second.trace()
    }
}

pub trait SdeProblem: Send + Sync {
    /// State dimension `d`.
    fn dim(&self) -> usize;
    /// Number of driving Wiener processes `m`.
    fn noise_dim(&self) -> usize;
    fn t0(&self) -> f64;
    fn t_end(&self) -> f64;
    fn x0(&self) -> Vec<f64>;

    /// Writes `g^k(t, x)` into `out` (`k = 0` is the drift).
    fn coefficient(&self, k: usize, t: f64, x: &[f64], out: &mut [f64]);

    /// Analytic `∂g^k/∂x`; `None` falls back to central differences.
    fn jacobian_x(&self, _k: usize, _t: f64, _x: &[f64]) -> Option<Matrix> {
        None
    }

    /// Analytic `∂g^k/∂t`; `None` falls back to central differences.
    fn jacobian_t(&self, _k: usize, _t: f64, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Closed-form mean and second moment of `X_t`, if known.
    fn exact_moments(&self, _t: f64) -> Option<Moments> {
        None
    }

    /// Closed-form `E|X_t|²`, if known.
    fn exact_mean_square(&self, t: f64) -> Option<f64> {
        self.exact_moments(t).map(|m| m.mean_square())
    }
}

/// Coefficients of the linear SDE frozen at `(tau, z)`:
/// `g^k(s, x) ≈ B^k x + b0^k + b1^k (s - tau)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizationData {
    pub jac: Vec<Matrix>,
    pub b_const: Vec<Vec<f64>>,
    pub b_slope: Vec<Vec<f64>>,
    pub tau: f64,
    pub z: Vec<f64>,
}

impl LinearizationData {
    pub fn dim(&self) -> usize {
        self.z.len()
    }

    /// Number of diffusion terms `m` (excludes the drift).
    pub fn noise_dim(&self) -> usize {
        self.jac.len() - 1
    }

    /// `b^k(s) = b0^k + b1^k (s - tau)`.
    pub fn b_at(&self, k: usize, s: f64) -> Vec<f64> {
        let dt = s - self.tau;
        self.b_const[k]
            .iter()
            .zip(&self.b_slope[k])
            .map(|(c, sl)| c + sl * dt)
            .collect()
    }

    /// Linearization with every coefficient zero.
    pub fn zero(d: usize, m: usize, tau: f64, z: Vec<f64>) -> Self {
        Self {
            jac: vec![Matrix::zeros(d, d); m + 1],
            b_const: vec![vec![0.0; d]; m + 1],
            b_slope: vec![vec![0.0; d]; m + 1],
            tau,
            z,
        }
    }
}

fn fd_step(v: f64) -> f64 {
    libm::cbrt(f64::EPSILON) * libm::fabs(v).max(1.0)
}

fn check_finite(v: &[f64], context: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { context })
    }
}

/// Central-difference `∂g^k/∂x`.
pub fn fd_jacobian_x<P: SdeProblem + ?Sized>(p: &P, k: usize, t: f64, x: &[f64]) -> Matrix {
    let d = x.len();
    let mut jac = Matrix::zeros(d, d);
    let mut xp = x.to_vec();
    let mut plus = vec![0.0; d];
    let mut minus = vec![0.0; d];
    for j in 0..d {
        let h = fd_step(x[j]);
        xp[j] = x[j] + h;
        p.coefficient(k, t, &xp, &mut plus);
        xp[j] = x[j] - h;
        p.coefficient(k, t, &xp, &mut minus);
        xp[j] = x[j];
        for i in 0..d {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jac
}

/// Central-difference `∂g^k/∂t`.
pub fn fd_jacobian_t<P: SdeProblem + ?Sized>(p: &P, k: usize, t: f64, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let h = fd_step(t);
    let mut plus = vec![0.0; d];
    let mut minus = vec![0.0; d];
    p.coefficient(k, t + h, x, &mut plus);
    p.coefficient(k, t - h, x, &mut minus);
    plus.iter()
        .zip(&minus)
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect()
}

/// First-order Taylor expansion of every coefficient at `(tau, z)`:
/// `B^k = ∂g^k/∂x`, `b0^k = g^k - B^k z`, `b1^k = ∂g^k/∂t`.
pub fn linearize<P: SdeProblem + ?Sized>(p: &P, tau: f64, z: &[f64]) -> Result<LinearizationData> {
    let d = p.dim();
    if z.len() != d {
        return Err(Error::Length {
            op: "linearize",
            expected: d,
            got: z.len(),
        });
    }
    check_finite(z, "linearization anchor state")?;
    let slack = 1e-9 * (p.t_end() - p.t0()).abs().max(1.0);
    if !(tau >= p.t0() - slack && tau <= p.t_end() + slack) {
        return Err(Error::InvalidArgument("linearize: tau outside [t0, T]"));
    }

    let m = p.noise_dim();
    let mut jac = Vec::with_capacity(m + 1);
    let mut b_const = Vec::with_capacity(m + 1);
    let mut b_slope = Vec::with_capacity(m + 1);
    let mut g = vec![0.0; d];
    for k in 0..=m {
        p.coefficient(k, tau, z, &mut g);
        check_finite(&g, "coefficient evaluation")?;
        let bk = p
            .jacobian_x(k, tau, z)
            .unwrap_or_else(|| fd_jacobian_x(p, k, tau, z));
        if !bk.is_finite() {
            return Err(Error::NonFinite {
                context: "coefficient Jacobian",
            });
        }
        let slope = p
            .jacobian_t(k, tau, z)
            .unwrap_or_else(|| fd_jacobian_t(p, k, tau, z));
        check_finite(&slope, "coefficient time derivative")?;
        let bz = bk.mat_vec(z);
        b_const.push(g.iter().zip(&bz).map(|(gi, bi)| gi - bi).collect());
        b_slope.push(slope);
        jac.push(bk);
    }
    Ok(LinearizationData {
        jac,
        b_const,
        b_slope,
        tau,
        z: z.to_vec(),
    })
}

/// Strictly increasing time nodes `t_0 < t_1 < ... < t_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Grid("no nodes"));
        }
        if nodes.iter().any(|t| !t.is_finite()) {
            return Err(Error::Grid("non-finite node"));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Grid("nodes must be strictly increasing"));
        }
        Ok(Self { nodes })
    }

    /// `t_n = t0 + n * delta`, `n = 0..=N`, where `N * delta` must equal
    /// `t_end - t0` up to rounding. The last node is set to `t_end`.
    pub fn uniform(t0: f64, t_end: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Grid("delta must be positive"));
        }
        if !(t_end > t0) {
            return Err(Error::Grid("t_end must exceed t0"));
        }
        let span = t_end - t0;
        let steps = libm::round(span / delta);
        if steps < 1.0 || libm::fabs(steps * delta - span) > 1e-9 * span.max(1.0) {
            return Err(Error::Grid("t_end - t0 is not a multiple of delta"));
        }
        let n = steps as usize;
        let mut nodes: Vec<f64> = (0..=n).map(|i| t0 + i as f64 * delta).collect();
        nodes[n] = t_end;
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    /// `(tau_n, tau_{n+1} - tau_n)`.
    pub fn step(&self, n: usize) -> (f64, f64) {
        (self.nodes[n], self.nodes[n + 1] - self.nodes[n])
    }

    pub fn start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn end(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// All steps equal to relative 1e-12; returns that step.
    pub fn uniform_step(&self) -> Option<f64> {
        if self.steps() == 0 {
            return None;
        }
        let h0 = self.step(0).1;
        (0..self.steps())
            .all(|n| libm::fabs(self.step(n).1 - h0) <= 1e-12 * h0.max(libm::fabs(self.end())))
            .then_some(h0)
    }
}
