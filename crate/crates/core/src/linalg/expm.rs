//! Matrix exponential by diagonal Padé approximants with scaling and
//! squaring (Higham 2005). The degree is the smallest of 3, 5, 7, 9 whose
//! 1-norm threshold covers the input; otherwise degree 13 after scaling by
//! `2^-s`.

#![allow(clippy::excessive_precision)]

use super::{solve, Matrix};
use crate::{Error, Result};

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// `e^A` for a square matrix with finite entries.
pub fn expm(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            op: "expm",
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if !a.is_finite() {
        return Err(Error::NonFinite {
            context: "expm input",
        });
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }

    let norm = a.norm1();
    let result = if norm <= THETA_9 {
        let coeffs: &[f64] = if norm <= THETA_3 {
            &B3
        } else if norm <= THETA_5 {
            &B5
        } else if norm <= THETA_7 {
            &B7
        } else {
            &B9
        };
        pade_low(a, coeffs)?
    } else {
        let s = libm::ceil(libm::log2(norm / THETA_13)).max(0.0) as i32;
        let scaled = a.scale(libm::exp2(-s as f64));
        let mut r = pade13(&scaled)?;
        for _ in 0..s {
            r = r.matmul(&r);
        }
        r
    };

    if !result.is_finite() {
        return Err(Error::NonFinite {
            context: "expm result",
        });
    }
    Ok(result)
}

/// Degree 3..9: `U = A Σ b_{2k+1} A^{2k}`, `V = Σ b_{2k} A^{2k}`.
fn pade_low(a: &Matrix, b: &[f64]) -> Result<Matrix> {
    let n = a.rows();
    let ident = Matrix::identity(n);
    let a2 = a.matmul(a);
    let mut u_inner = ident.scale(b[1]);
    let mut v = ident.scale(b[0]);
    let mut power = ident;
    for k in 1..b.len() / 2 {
        power = power.matmul(&a2);
        u_inner.add_assign(&power.scale(b[2 * k + 1]));
        v.add_assign(&power.scale(b[2 * k]));
    }
    let u = a.matmul(&u_inner);
    solve(&v.sub(&u), &v.add(&u))
}

fn pade13(a: &Matrix) -> Result<Matrix> {
    let b = &B13;
    let ident = Matrix::identity(a.rows());
    let a2 = a.matmul(a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);

    let mut u_hi = a6.scale(b[13]);
    u_hi.add_assign(&a4.scale(b[11]));
    u_hi.add_assign(&a2.scale(b[9]));
    let mut u_inner = a6.matmul(&u_hi);
    u_inner.add_assign(&a6.scale(b[7]));
    u_inner.add_assign(&a4.scale(b[5]));
    u_inner.add_assign(&a2.scale(b[3]));
    u_inner.add_assign(&ident.scale(b[1]));
    let u = a.matmul(&u_inner);

    let mut v_hi = a6.scale(b[12]);
    v_hi.add_assign(&a4.scale(b[10]));
    v_hi.add_assign(&a2.scale(b[8]));
    let mut v = a6.matmul(&v_hi);
    v.add_assign(&a6.scale(b[6]));
    v.add_assign(&a4.scale(b[4]));
    v.add_assign(&a2.scale(b[2]));
    v.add_assign(&ident.scale(b[0]));

    solve(&v.sub(&u), &v.add(&u))
}
