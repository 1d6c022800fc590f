//! Benchmark problems with closed-form ground truth.
//!
//! * [`Example1`]: bilinear 2-d SDE with random oscillatory dynamics; exact
//!   path as a function of the Wiener values and exact mean/variance.
//! * [`Example2`]: nonautonomous nonlinear 2-d SDE with known `E|X_t|²`.
//! * [`Gbm`]: scalar `dX = aX dt + bX dW` ("gbm", "scalar-stability").
//! * [`LinearSde`]: arbitrary linear SDE with affine-in-time inhomogeneity,
//!   used for randomized tests.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{expm, unvec, vec as vectorize, Matrix};
use crate::sde::{Moments, SdeProblem};

/// Samples the exact solution at time `t` from the Wiener values `W_t`.
pub trait ExactSampler: Send + Sync {
    fn wiener_dim(&self) -> usize;
    fn sample(&self, t: f64, wiener: &[f64]) -> Vec<f64>;
}

fn rotation_generator() -> Matrix {
    Matrix::from_rows(&[[0.0, 1.0], [-1.0, 0.0]])
}

/// `dX = αJX dt + ρ₁JX dW¹ + ρ₂X dW²`, `J = [[0,1],[-1,0]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Example1 {
    pub alpha: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub x0: [f64; 2],
    pub t_end: f64,
}

impl Default for Example1 {
    fn default() -> Self {
        Self {
            alpha: 10.0,
            rho1: 0.1,
            rho2: 0.2,
            x0: [1.0, 2.0],
            t_end: 12.5625,
        }
    }
}

impl Example1 {
    /// `X_t = e^c R(θ) x0`, `c = (ρ₁²-ρ₂²)t/2 + ρ₂w₂`, `θ = αt + ρ₁w₁`,
    /// where `R(θ) = exp(θJ)`. Valid because `I` and `J` commute.
    pub fn exact_sample(&self, w1: f64, w2: f64, t: f64) -> [f64; 2] {
        let c = 0.5 * (self.rho1 * self.rho1 - self.rho2 * self.rho2) * t + self.rho2 * w2;
        let theta = self.alpha * t + self.rho1 * w1;
        let (s, co) = (libm::sin(theta), libm::cos(theta));
        let scale = libm::exp(c);
        let [x1, x2] = self.x0;
        [scale * (co * x1 + s * x2), scale * (-s * x1 + co * x2)]
    }

    /// The 8x8 generator `H = diag(A, 0, C)` whose exponential carries the
    /// vectorized second moment (block `A`) and the mean offset (block `C`).
    pub fn moment_generator(&self) -> Matrix {
        let (a, r1, r2) = (self.alpha, self.rho1 * self.rho1, self.rho2 * self.rho2);
        let [x1, x2] = self.x0;
        let block_a = Matrix::from_rows(&[
            [r2, a, a, r1],
            [-a, r2, -r1, a],
            [-a, -r1, r2, a],
            [r1, -a, -a, r2],
        ]);
        let block_c = Matrix::from_rows(&[[0.0, a, a * x2], [-a, 0.0, -a * x1], [0.0, 0.0, 0.0]]);
        let mut h = Matrix::zeros(8, 8);
        h.set_block(0, 0, &block_a);
        h.set_block(5, 5, &block_c);
        h
    }

    /// Exact mean and variance at time `t`.
    pub fn exact_mean_variance(&self, t: f64) -> (Vec<f64>, Matrix) {
        let m = self.exact_moments_at(t);
        let v = m.covariance();
        (m.mean, v)
    }

    fn exact_moments_at(&self, t: f64) -> Moments {
        let x0 = self.x0;
        let mut u0 = vectorize(&Matrix::outer(&x0, &x0));
        u0.extend_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        let e = expm(&self.moment_generator().scale(t)).expect("finite 8x8 generator");
        let w = e.mat_vec(&u0);
        let mean = vec![x0[0] + w[5], x0[1] + w[6]];
        let second = unvec(&w[..4], 2).expect("4 entries").symmetrized();
        Moments { mean, second }
    }
}

impl SdeProblem for Example1 {
    fn dim(&self) -> usize {
        2
    }
    fn noise_dim(&self) -> usize {
        2
    }
    fn t0(&self) -> f64 {
        0.0
    }
    fn t_end(&self) -> f64 {
        self.t_end
    }
    fn x0(&self) -> Vec<f64> {
        self.x0.to_vec()
    }

    fn coefficient(&self, k: usize, _t: f64, x: &[f64], out: &mut [f64]) {
        let (jx1, jx2) = (x[1], -x[0]);
        match k {
            0 => {
                out[0] = self.alpha * jx1;
                out[1] = self.alpha * jx2;
            }
            1 => {
                out[0] = self.rho1 * jx1;
                out[1] = self.rho1 * jx2;
            }
            2 => {
                out[0] = self.rho2 * x[0];
                out[1] = self.rho2 * x[1];
            }
            _ => panic!("Example1 has coefficients 0..=2, got {k}"),
        }
    }

    fn jacobian_x(&self, k: usize, _t: f64, _x: &[f64]) -> Option<Matrix> {
        Some(match k {
            0 => rotation_generator().scale(self.alpha),
            1 => rotation_generator().scale(self.rho1),
            _ => Matrix::identity(2).scale(self.rho2),
        })
    }

    fn jacobian_t(&self, _k: usize, _t: f64, _x: &[f64]) -> Option<Vec<f64>> {
        Some(vec![0.0; 2])
    }

    fn exact_moments(&self, t: f64) -> Option<Moments> {
        Some(self.exact_moments_at(t))
    }

    fn exact_mean_square(&self, t: f64) -> Option<f64> {
        let r0 = self.x0[0] * self.x0[0] + self.x0[1] * self.x0[1];
        Some(r0 * libm::exp((self.rho1 * self.rho1 + self.rho2 * self.rho2) * t))
    }
}

impl ExactSampler for Example1 {
    fn wiener_dim(&self) -> usize {
        2
    }
    fn sample(&self, t: f64, wiener: &[f64]) -> Vec<f64> {
        self.exact_sample(wiener[0], wiener[1], t).to_vec()
    }
}

/// Nonautonomous nonlinear test problem:
/// `dX¹ = -X² dt + cos(X¹+X²)/√(1+t) dW²`,
/// `dX² =  X¹ dt + sin(X¹+X²)/√(1+t) dW¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct Example2 {
    pub x0: [f64; 2],
    pub t_end: f64,
}

impl Default for Example2 {
    fn default() -> Self {
        Self {
            x0: [1.0, 1.0],
            t_end: 10.0,
        }
    }
}

impl Example2 {
    /// `E|X_t|² = |x0|² + log(1+t)`: the drift is a rotation, and
    /// `Σ|g^k|² = 1/(1+t)`.
    pub fn exact_functional(&self, t: f64) -> f64 {
        self.x0[0] * self.x0[0] + self.x0[1] * self.x0[1] + libm::log1p(t)
    }
}

impl SdeProblem for Example2 {
    fn dim(&self) -> usize {
        2
    }
    fn noise_dim(&self) -> usize {
        2
    }
    fn t0(&self) -> f64 {
        0.0
    }
    fn t_end(&self) -> f64 {
        self.t_end
    }
    fn x0(&self) -> Vec<f64> {
        self.x0.to_vec()
    }

    fn coefficient(&self, k: usize, t: f64, x: &[f64], out: &mut [f64]) {
        let damp = 1.0 / libm::sqrt(1.0 + t);
        let s = x[0] + x[1];
        match k {
            0 => {
                out[0] = -x[1];
                out[1] = x[0];
            }
            1 => {
                out[0] = 0.0;
                out[1] = libm::sin(s) * damp;
            }
            2 => {
                out[0] = libm::cos(s) * damp;
                out[1] = 0.0;
            }
            _ => panic!("Example2 has coefficients 0..=2, got {k}"),
        }
    }

    fn jacobian_x(&self, k: usize, t: f64, x: &[f64]) -> Option<Matrix> {
        let damp = 1.0 / libm::sqrt(1.0 + t);
        let s = x[0] + x[1];
        Some(match k {
            0 => Matrix::from_rows(&[[0.0, -1.0], [1.0, 0.0]]),
            1 => {
                let c = libm::cos(s) * damp;
                Matrix::from_rows(&[[0.0, 0.0], [c, c]])
            }
            _ => {
                let c = -libm::sin(s) * damp;
                Matrix::from_rows(&[[c, c], [0.0, 0.0]])
            }
        })
    }

    fn jacobian_t(&self, k: usize, t: f64, x: &[f64]) -> Option<Vec<f64>> {
        // d/dt (1+t)^{-1/2} = -(1+t)^{-3/2} / 2
        let ddamp = -0.5 / ((1.0 + t) * libm::sqrt(1.0 + t));
        let s = x[0] + x[1];
        Some(match k {
            0 => vec![0.0, 0.0],
            1 => vec![0.0, libm::sin(s) * ddamp],
            _ => vec![libm::cos(s) * ddamp, 0.0],
        })
    }

    fn exact_mean_square(&self, t: f64) -> Option<f64> {
        Some(self.exact_functional(t))
    }
}

/// Scalar `dX = aX dt + bX dW`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gbm {
    pub a: f64,
    pub b: f64,
    pub x0: f64,
    pub t_end: f64,
}

impl Gbm {
    pub fn new(a: f64, b: f64, x0: f64, t_end: f64) -> Self {
        Self { a, b, x0, t_end }
    }

    /// Mean-square stable test equation (`2a + b² = -3`).
    pub fn scalar_stability() -> Self {
        Self::new(-2.0, 1.0, 1.0, 20.0)
    }
}

impl Default for Gbm {
    fn default() -> Self {
        Self::new(0.5, 0.3, 1.0, 1.0)
    }
}

impl SdeProblem for Gbm {
    fn dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn t0(&self) -> f64 {
        0.0
    }
    fn t_end(&self) -> f64 {
        self.t_end
    }
    fn x0(&self) -> Vec<f64> {
        vec![self.x0]
    }
    fn coefficient(&self, k: usize, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = if k == 0 { self.a } else { self.b } * x[0];
    }
    fn jacobian_x(&self, k: usize, _t: f64, _x: &[f64]) -> Option<Matrix> {
        Some(Matrix::from_diag(&[if k == 0 { self.a } else { self.b }]))
    }
    fn jacobian_t(&self, _k: usize, _t: f64, _x: &[f64]) -> Option<Vec<f64>> {
        Some(vec![0.0])
    }
    /// `E X_t = x0 e^{at}`, `E X_t² = x0² e^{(2a+b²)t}`.
    fn exact_moments(&self, t: f64) -> Option<Moments> {
        Some(Moments {
            mean: vec![self.x0 * libm::exp(self.a * t)],
            second: Matrix::from_diag(&[self.x0 * self.x0 * libm::exp((2.0 * self.a + self.b * self.b) * t)]),
        })
    }
}

impl ExactSampler for Gbm {
    fn wiener_dim(&self) -> usize {
        1
    }
    fn sample(&self, t: f64, wiener: &[f64]) -> Vec<f64> {
        vec![self.x0 * libm::exp((self.a - 0.5 * self.b * self.b) * t + self.b * wiener[0])]
    }
}

/// `dX = Σ_k (B^k X + c^k + s^k t) dW^k` with `W^0_t = t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSde {
    pub mats: Vec<Matrix>,
    pub offsets: Vec<Vec<f64>>,
    pub slopes: Vec<Vec<f64>>,
    pub x0: Vec<f64>,
    pub span: (f64, f64),
}

impl LinearSde {
    /// `mats`, `offsets` and `slopes` hold `m + 1` entries each (drift first).
    pub fn new(
        mats: Vec<Matrix>,
        offsets: Vec<Vec<f64>>,
        slopes: Vec<Vec<f64>>,
        x0: Vec<f64>,
        span: (f64, f64),
    ) -> Self {
        assert!(mats.len() >= 2, "need a drift and at least one diffusion term");
        assert!(mats.len() == offsets.len() && mats.len() == slopes.len());
        Self {
            mats,
            offsets,
            slopes,
            x0,
            span,
        }
    }
}

impl SdeProblem for LinearSde {
    fn dim(&self) -> usize {
        self.x0.len()
    }
    fn noise_dim(&self) -> usize {
        self.mats.len() - 1
    }
    fn t0(&self) -> f64 {
        self.span.0
    }
    fn t_end(&self) -> f64 {
        self.span.1
    }
    fn x0(&self) -> Vec<f64> {
        self.x0.clone()
    }
    fn coefficient(&self, k: usize, t: f64, x: &[f64], out: &mut [f64]) {
        let bx = self.mats[k].mat_vec(x);
        for i in 0..out.len() {
            out[i] = bx[i] + self.offsets[k][i] + self.slopes[k][i] * t;
        }
    }
    fn jacobian_x(&self, k: usize, _t: f64, _x: &[f64]) -> Option<Matrix> {
        Some(self.mats[k].clone())
    }
    fn jacobian_t(&self, k: usize, _t: f64, _x: &[f64]) -> Option<Vec<f64>> {
        Some(self.slopes[k].clone())
    }
}

/// Problems selectable by name.
#[derive(Debug, Clone, PartialEq)]
pub enum NamedProblem {
    Example1(Example1),
    Example2(Example2),
    Gbm(Gbm),
    ScalarStability(Gbm),
}

impl NamedProblem {
    pub const NAMES: [&'static str; 4] = ["example1", "example2", "gbm", "scalar-stability"];

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "example1" => Self::Example1(Example1::default()),
            "example2" => Self::Example2(Example2::default()),
            "gbm" => Self::Gbm(Gbm::default()),
            "scalar-stability" => Self::ScalarStability(Gbm::scalar_stability()),
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Example1(_) => "example1",
            Self::Example2(_) => "example2",
            Self::Gbm(_) => "gbm",
            Self::ScalarStability(_) => "scalar-stability",
        }
    }

    /// Same problem integrated up to `t_end` instead of its default horizon.
    pub fn with_t_end(mut self, t_end: f64) -> Self {
        match &mut self {
            Self::Example1(p) => p.t_end = t_end,
            Self::Example2(p) => p.t_end = t_end,
            Self::Gbm(p) | Self::ScalarStability(p) => p.t_end = t_end,
        }
        self
    }

    pub fn problem(&self) -> &dyn SdeProblem {
        match self {
            Self::Example1(p) => p,
            Self::Example2(p) => p,
            Self::Gbm(p) | Self::ScalarStability(p) => p,
        }
    }

    pub fn exact_sampler(&self) -> Option<&dyn ExactSampler> {
        match self {
            Self::Example1(p) => Some(p),
            Self::Example2(_) => None,
            Self::Gbm(p) | Self::ScalarStability(p) => Some(p),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn example1_parameters() {
        let p = Example1::default();
        assert_eq!(p.rho2, 2.0 * p.rho1);
        assert_eq!((p.alpha, p.rho1, p.x0, p.t_end), (10.0, 0.1, [1.0, 2.0], 12.5625));
    }

    #[test]
    fn example1_sample_at_origin() {
        assert_eq!(Example1::default().exact_sample(0.0, 0.0, 0.0), [1.0, 2.0]);
    }

    #[test]
    fn example1_deterministic_part_is_scaled_rotation() {
        let p = Example1::default();
        let t = core::f64::consts::PI / (2.0 * p.alpha);
        let x = p.exact_sample(0.0, 0.0, t);
        // quarter turn: (x1, x2) -> (x2, -x1)
        let scale = libm::exp(0.5 * (p.rho1 * p.rho1 - p.rho2 * p.rho2) * t);
        assert!(close(x[0], 2.0 * scale, 1e-14));
        assert!(close(x[1], -scale, 1e-14));
    }

    #[test]
    fn example1_sample_matches_generic_expm() {
        let p = Example1::default();
        let c = 0.5 * (p.rho1 * p.rho1 - p.rho2 * p.rho2);
        for (t, w1, w2) in [(0.3, 0.2, -0.5), (2.0, -1.3, 0.7), (12.5625, 3.1, -2.4)] {
            let exponent = Matrix::from_rows(&[
                [c * t + p.rho2 * w2, p.alpha * t + p.rho1 * w1],
                [-(p.alpha * t + p.rho1 * w1), c * t + p.rho2 * w2],
            ]);
            let expect = expm(&exponent).unwrap().mat_vec(&p.x0);
            let got = p.exact_sample(w1, w2, t);
            for i in 0..2 {
                assert!((got[i] - expect[i]).abs() <= 1e-12 * expect[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn example1_moments_at_zero() {
        let (m, v) = Example1::default().exact_mean_variance(0.0);
        assert_eq!(m, vec![1.0, 2.0]);
        assert!(v.frobenius_norm() < 1e-15);
    }

    #[test]
    fn example1_mean_solves_mean_ode() {
        let p = Example1::default();
        for t in [0.1, 1.0, 5.5, 12.5625] {
            let (m, _) = p.exact_mean_variance(t);
            // m_t = exp(αJt) x0
            let (s, c) = (libm::sin(p.alpha * t), libm::cos(p.alpha * t));
            let expect = [c * 1.0 + s * 2.0, -s * 1.0 + c * 2.0];
            for i in 0..2 {
                assert!((m[i] - expect[i]).abs() < 1e-10, "t={t}");
            }
        }
    }

    #[test]
    fn example1_mean_square_identity() {
        let p = Example1::default();
        for t in [0.0, 0.5, 3.0, 12.5625] {
            let (m, v) = p.exact_mean_variance(t);
            let lhs = v.trace() + m[0] * m[0] + m[1] * m[1];
            let rhs = 5.0 * libm::exp((p.rho1 * p.rho1 + p.rho2 * p.rho2) * t);
            assert!(close(lhs, rhs, 1e-10), "t={t}: {lhs} vs {rhs}");
            assert!(close(p.exact_mean_square(t).unwrap(), rhs, 1e-15));
        }
    }

    #[test]
    fn example2_functional() {
        let p = Example2::default();
        assert_eq!(p.exact_functional(0.0), 2.0);
        assert!(close(p.exact_functional(core::f64::consts::E - 1.0), 3.0, 1e-15));
    }

    #[test]
    fn example2_ito_drift_of_mean_square() {
        // 2 x·f + Σ_k |g^k|² must equal 1/(1+t) at every (t, x)
        let p = Example2::default();
        let mut g = [0.0; 2];
        for (t, x) in [(0.0, [1.0, 1.0]), (2.5, [-0.3, 4.0]), (9.0, [7.0, -7.5])] {
            p.coefficient(0, t, &x, &mut g);
            let mut drift = 2.0 * (x[0] * g[0] + x[1] * g[1]);
            for k in 1..=2 {
                p.coefficient(k, t, &x, &mut g);
                drift += g[0] * g[0] + g[1] * g[1];
            }
            assert!(close(drift, 1.0 / (1.0 + t), 1e-15));
        }
    }

    #[test]
    fn gbm_moments() {
        let p = Gbm::default();
        let m = p.exact_moments(0.1).unwrap();
        assert!(close(m.mean[0], libm::exp(0.05), 1e-15));
        assert!(close(m.second[(0, 0)], libm::exp(0.109), 1e-15));
    }

    #[test]
    fn registry_round_trip() {
        for name in NamedProblem::NAMES {
            let p = NamedProblem::from_name(name).unwrap();
            assert_eq!(p.name(), name);
            assert!(p.problem().dim() >= 1);
        }
        assert!(NamedProblem::from_name("milstein").is_none());
        assert!(NamedProblem::from_name("example2")
            .unwrap()
            .exact_sampler()
            .is_none());
    }
}
