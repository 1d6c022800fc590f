use alloc::vec::Vec;

use super::Matrix;
use crate::{Error, Result};

const MAX_SWEEPS: usize = 64;

/// Eigen-decomposition `S = Q diag(values) Qᵀ` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Orthogonal; column `i` pairs with `values[i]`.
    pub vectors: Matrix,
}

/// Cyclic Jacobi rotations. Only the upper triangle is read after
/// symmetrizing, so mildly asymmetric input is accepted.
pub fn symmetric_eigen(s: &Matrix) -> Result<SymmetricEigen> {
    if !s.is_square() {
        return Err(Error::NotSquare {
            op: "symmetric_eigen",
            rows: s.rows(),
            cols: s.cols(),
        });
    }
    if !s.is_finite() {
        return Err(Error::NonFinite {
            context: "symmetric_eigen input",
        });
    }
    let n = s.rows();
    let mut a = s.symmetrized();
    let mut q = Matrix::identity(n);
    let scale = a.frobenius_norm();

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off <= (f64::EPSILON * scale) * (f64::EPSILON * scale) || off == 0.0 {
            break;
        }
        for p in 0..n {
            for r in p + 1..n {
                let apr = a[(p, r)];
                if apr == 0.0 {
                    continue;
                }
                let theta = (a[(r, r)] - a[(p, p)]) / (2.0 * apr);
                let t = libm::copysign(1.0, theta) / (libm::fabs(theta) + libm::hypot(theta, 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akr = a[(k, r)];
                    a[(k, p)] = c * akp - sn * akr;
                    a[(k, r)] = sn * akp + c * akr;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let ark = a[(r, k)];
                    a[(p, k)] = c * apk - sn * ark;
                    a[(r, k)] = sn * apk + c * ark;
                }
                for k in 0..n {
                    let qkp = q[(k, p)];
                    let qkr = q[(k, r)];
                    q[(k, p)] = c * qkp - sn * qkr;
                    q[(k, r)] = sn * qkp + c * qkr;
                }
            }
        }
    }

    Ok(SymmetricEigen {
        values: (0..n).map(|i| a[(i, i)]).collect(),
        vectors: q,
    })
}

/// Negative-eigenvalue tolerance `1e-8 * max(1, trace(S))` used by
/// [`psd_sqrt`].
pub fn psd_tolerance(s: &Matrix) -> f64 {
    1e-8 * s.trace().max(1.0)
}

/// Symmetric PSD square root `R = Q diag(sqrt(λ)) Qᵀ`, so `R Rᵀ = R² = S`.
///
/// Eigenvalues in `[-tol, 0)` are clamped to zero; anything below `-tol`
/// means `S` is not a covariance and yields [`Error::NotPsd`].
pub fn psd_sqrt(s: &Matrix) -> Result<Matrix> {
    let tol = psd_tolerance(s);
    let eig = symmetric_eigen(s)?;
    let n = s.rows();
    let mut roots = Vec::with_capacity(n);
    for &lambda in &eig.values {
        if lambda < -tol {
            return Err(Error::NotPsd {
                eigenvalue: lambda,
                tolerance: tol,
            });
        }
        roots.push(libm::sqrt(lambda.max(0.0)));
    }
    let q = &eig.vectors;
    let r = Matrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| q[(i, k)] * roots[k] * q[(j, k)]).sum()
    });
    Ok(r.symmetrized())
}
