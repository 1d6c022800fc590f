use alloc::vec::Vec;

use super::Matrix;
use crate::{Error, Result};

/// Kronecker product: block `(i, j)` of the result is `a[(i, j)] * b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let overflow = Error::DimensionOverflow { op: "kron" };
    let rows = a.rows().checked_mul(b.rows()).ok_or(overflow.clone())?;
    let cols = a.cols().checked_mul(b.cols()).ok_or(overflow.clone())?;
    rows.checked_mul(cols).ok_or(overflow)?;

    let mut out = Matrix::zeros(rows, cols);
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            for p in 0..b.rows() {
                for q in 0..b.cols() {
                    out[(i * b.rows() + p, j * b.cols() + q)] = s * b[(p, q)];
                }
            }
        }
    }
    Ok(out)
}

/// Kronecker sum.
///
/// For square `a` (p x p) and `b` (q x q) this is `a ⊗ I_q + I_p ⊗ b`.
/// For two column vectors of the same length `d` it is `a ⊗ I_d + I_d ⊗ b`,
/// the `d² x d` matrix with `(a ⊕ b) x = vec(x aᵀ) + vec(b xᵀ)`.
pub fn kron_sum(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.is_square() && b.is_square() {
        let left = kron(a, &Matrix::identity(b.rows()))?;
        let right = kron(&Matrix::identity(a.rows()), b)?;
        return Ok(left.add(&right));
    }
    if a.cols() == 1 && b.cols() == 1 && a.rows() == b.rows() {
        let id = Matrix::identity(a.rows());
        return Ok(kron(a, &id)?.add(&kron(&id, b)?));
    }
    Err(Error::Shape {
        op: "kron_sum",
        lhs: a.shape(),
        rhs: b.shape(),
    })
}

/// Column-stacking vectorization.
pub fn vec(a: &Matrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.rows() * a.cols());
    for j in 0..a.cols() {
        for i in 0..a.rows() {
            out.push(a[(i, j)]);
        }
    }
    out
}

/// Inverse of [`vec`] for a `d x d` matrix.
pub fn unvec(v: &[f64], d: usize) -> Result<Matrix> {
    if v.len() != d * d {
        return Err(Error::Length {
            op: "unvec",
            expected: d * d,
            got: v.len(),
        });
    }
    Ok(Matrix::from_fn(d, d, |i, j| v[j * d + i]))
}
