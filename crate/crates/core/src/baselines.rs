//! Weak Euler scheme and first-order Romberg extrapolation, for comparison
//! with the LL scheme.

use alloc::vec;
use alloc::vec::Vec;

use crate::scheme::Stepper;
use crate::sde::{SdeProblem, TimeGrid};
use crate::{Error, Result};

/// States whose Euclidean norm exceeds this are reported as overflowed.
pub const OVERFLOW_NORM: f64 = 1e12;

/// `z' = z + f(t,z) h + Σ_k g^k(t,z) sqrt(h) eta_k` with two-point `eta`.
pub fn euler_weak_step<P: SdeProblem + ?Sized>(
    p: &P,
    t: f64,
    z: &[f64],
    h: f64,
    eta: &[f64],
) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("step size must be positive"));
    }
    if eta.len() != p.noise_dim() {
        return Err(Error::Length {
            op: "euler_weak_step eta",
            expected: p.noise_dim(),
            got: eta.len(),
        });
    }
    let d = z.len();
    let mut g = vec![0.0; d];
    p.coefficient(0, t, z, &mut g);
    let mut next: Vec<f64> = z.iter().zip(&g).map(|(zi, fi)| zi + fi * h).collect();
    let sqrt_h = libm::sqrt(h);
    for (k, e) in eta.iter().enumerate() {
        p.coefficient(k + 1, t, z, &mut g);
        for (ni, gi) in next.iter_mut().zip(&g) {
            *ni += gi * sqrt_h * e;
        }
    }
    let norm = libm::sqrt(next.iter().map(|v| v * v).sum::<f64>());
    if !(norm <= OVERFLOW_NORM) {
        return Err(Error::Overflow { norm });
    }
    Ok(next)
}

/// Weak Euler on a fixed grid.
pub struct EulerScheme<'a, P: ?Sized> {
    problem: &'a P,
    grid: &'a TimeGrid,
}

impl<'a, P: SdeProblem + ?Sized> EulerScheme<'a, P> {
    pub fn new(problem: &'a P, grid: &'a TimeGrid) -> Self {
        Self { problem, grid }
    }
}

impl<P: SdeProblem + ?Sized> Stepper for EulerScheme<'_, P> {
    fn noise_dim(&self) -> usize {
        self.problem.noise_dim()
    }

    fn step(&self, n: usize, z: &[f64], eta: &[f64]) -> Result<Vec<f64>> {
        let (t, h) = self.grid.step(n);
        euler_weak_step(self.problem, t, z, h, eta)
    }
}

/// A functional estimate together with the step size that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalEstimate {
    pub value: f64,
    pub step: f64,
}

/// `2 E_{h/2} - E_h`, cancelling the leading `O(h)` bias of a weak
/// order-1 scheme. `fine` must use half the step of `coarse`.
pub fn romberg_estimate(coarse: FunctionalEstimate, fine: FunctionalEstimate) -> Result<FunctionalEstimate> {
    if !(coarse.step > 0.0) || libm::fabs(2.0 * fine.step - coarse.step) > 1e-12 * coarse.step {
        return Err(Error::InvalidArgument(
            "romberg: fine step must be half the coarse step",
        ));
    }
    Ok(FunctionalEstimate {
        value: 2.0 * fine.value - coarse.value,
        step: fine.step,
    })
}
