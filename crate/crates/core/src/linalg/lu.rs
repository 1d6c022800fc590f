use super::Matrix;
use crate::{Error, Result};

/// Solves `a x = b` for a square `a` by LU with partial pivoting; `b` may
/// have several columns.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if !a.is_square() {
        return Err(Error::NotSquare {
            op: "solve",
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if b.rows() != n {
        return Err(Error::Shape {
            op: "solve",
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    let mut lu = a.clone();
    let mut x = b.clone();
    let k_cols = b.cols();

    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| libm::fabs(lu[(i, col)]).total_cmp(&libm::fabs(lu[(j, col)])))
            .unwrap_or(col);
        if lu[(pivot, col)] == 0.0 {
            return Err(Error::InvalidArgument("solve: singular matrix"));
        }
        if pivot != col {
            for j in 0..n {
                let tmp = lu[(col, j)];
                lu[(col, j)] = lu[(pivot, j)];
                lu[(pivot, j)] = tmp;
            }
            for j in 0..k_cols {
                let tmp = x[(col, j)];
                x[(col, j)] = x[(pivot, j)];
                x[(pivot, j)] = tmp;
            }
        }
        let diag = lu[(col, col)];
        for i in col + 1..n {
            let factor = lu[(i, col)] / diag;
            if factor == 0.0 {
                continue;
            }
            lu[(i, col)] = factor;
            for j in col + 1..n {
                let v = lu[(col, j)];
                lu[(i, j)] -= factor * v;
            }
            for j in 0..k_cols {
                let v = x[(col, j)];
                x[(i, j)] -= factor * v;
            }
        }
    }

    for i in (0..n).rev() {
        for j in 0..k_cols {
            let mut acc = x[(i, j)];
            for k in i + 1..n {
                acc -= lu[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = acc / lu[(i, i)];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_with_pivoting() {
        let a = Matrix::from_rows(&[[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]]);
        let x = Matrix::from_rows(&[[1.0, 0.5], [-2.0, 1.0], [0.25, 3.0]]);
        let b = a.matmul(&x);
        let got = solve(&a, &b).unwrap();
        assert!(got.sub(&x).frobenius_norm() < 1e-14);
    }

    #[test]
    fn singular_is_an_error() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        assert!(solve(&a, &Matrix::identity(2)).is_err());
    }
}
