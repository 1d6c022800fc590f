use llweak::linalg::{expm, psd_sqrt, Matrix};
use llweak::montecarlo::{normal_quantile, student_t_quantile, RngStream};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

/// `Σ A^k / k!` to `terms` terms after scaling by `2^-s` and squaring back.
/// Each sum uses Kahan compensation per entry.
fn taylor_expm(a: &Matrix, terms: usize) -> Matrix {
    let norm = a.norm1();
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale(0.5f64.powi(s));
    let n = a.rows();
    let mut sum = Matrix::identity(n);
    let mut comp = Matrix::zeros(n, n);
    let mut term = Matrix::identity(n);
    for k in 1..terms {
        term = term.matmul(&scaled).scale(1.0 / k as f64);
        for i in 0..n {
            for j in 0..n {
                let y = term[(i, j)] - comp[(i, j)];
                let t = sum[(i, j)] + y;
                comp[(i, j)] = (t - sum[(i, j)]) - y;
                sum[(i, j)] = t;
            }
        }
    }
    for _ in 0..s {
        sum = sum.matmul(&sum);
    }
    sum
}

fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    a.sub(b).frobenius_norm() / b.frobenius_norm()
}

#[test]
fn expm_matches_taylor_on_15x15() {
    let mut rng = RngStream::new(2024, 0);
    for _ in 0..5 {
        let a = Matrix::from_fn(15, 15, |_, _| 4.0 * rng.uniform_open() - 2.0);
        let err = rel_err(&expm(&a).unwrap(), &taylor_expm(&a, 60));
        assert!(err <= 1e-11, "relative error {err:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn expm_matches_taylor(n in 1usize..=20, seed in any::<u64>(), scale in 0.01f64..=50.0) {
        let mut rng = RngStream::new(seed, 1);
        let raw = Matrix::from_fn(n, n, |_, _| 2.0 * rng.uniform_open() - 1.0);
        let a = raw.scale(scale / raw.frobenius_norm().max(1e-300));
        let exact = taylor_expm(&a, 60);
        let err = rel_err(&expm(&a).unwrap(), &exact);
        // matrices with large norm lose accuracy in squaring for any method;
        // the bound follows the conditioning of the exponential
        prop_assert!(err <= 1e-11 * (1.0 + a.norm1()), "n={} err={:e}", n, err);
    }

    #[test]
    fn psd_sqrt_reconstructs(n in 1usize..=6, rank in 0usize..=6, seed in any::<u64>()) {
        let mut rng = RngStream::new(seed, 2);
        let g = Matrix::from_fn(n, rank.min(n), |_, _| 2.0 * rng.uniform_open() - 1.0);
        let s = g.matmul(&g.transpose());
        let r = psd_sqrt(&s).unwrap();
        prop_assert_eq!(r.clone(), r.transpose());
        let back = r.matmul(&r);
        prop_assert!(back.sub(&s).frobenius_norm() <= 1e-10 * s.frobenius_norm().max(1.0));
    }
}

/// Student-t density normalized by `lgamma`.
fn t_density(x: f64, df: f64) -> f64 {
    let ln_c = statrs::function::gamma::ln_gamma(0.5 * (df + 1.0))
        - statrs::function::gamma::ln_gamma(0.5 * df)
        - 0.5 * (df * std::f64::consts::PI).ln();
    (ln_c - 0.5 * (df + 1.0) * (x * x / df).ln_1p()).exp()
}

/// CDF for `x >= 0` as `1/2 + ∫_0^x density`, by composite Simpson.
fn t_cdf_quadrature(x: f64, df: f64) -> f64 {
    let n = 20_000;
    let h = x / n as f64;
    let mut s = t_density(0.0, df) + t_density(x, df);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * t_density(i as f64 * h, df);
    }
    0.5 + s * h / 3.0
}

fn t_quantile_oracle(p: f64, df: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 20.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if t_cdf_quadrature(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn student_t_quantile_matches_oracles() {
    for df in [9.0, 99.0, 999.0] {
        let reference = StudentsT::new(0.0, 1.0, df).unwrap();
        for p in [0.95, 0.975] {
            let got = student_t_quantile(p, df);
            let quad = t_quantile_oracle(p, df);
            assert!((got - quad).abs() <= 1e-8, "df={df} p={p}: {got} vs {quad}");
            let lib = reference.inverse_cdf(p);
            assert!((got - lib).abs() <= 1e-8, "df={df} p={p}: {got} vs {lib}");
        }
    }
    assert!((student_t_quantile(0.95, 99.0) - 1.6604).abs() < 1e-4);
}

#[test]
fn normal_quantile_matches_statrs() {
    let n = Normal::new(0.0, 1.0).unwrap();
    for p in [1e-12, 1e-6, 0.01, 0.2, 0.5, 0.77, 0.975, 0.999_999] {
        let (got, lib) = (normal_quantile(p), n.inverse_cdf(p));
        assert!(
            (got - lib).abs() <= 1e-9 * lib.abs().max(1.0),
            "p={p}: {got} vs {lib}"
        );
    }
}
