//! The weak local linearization step.
//!
//! Over `[tau_n, tau_{n+1}]` the SDE is replaced by its linearization at
//! `(tau_n, z_n)`. The conditional mean `mu` and second moment `sigma` of
//! that linear SDE at `tau_{n+1}` come from one exponential of the
//! augmented matrix built by [`build_augmented`]; the next state is
//! `mu + sqrt(sigma - mu muᵀ) eta` with `eta` a vector of independent
//! two-point (±1) variates.
//!
//! [`step_moments_ode`] integrates the moment ODEs directly with RK4 and is
//! the reference the augmented assembly is tested against.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{expm, kron, kron_sum, psd_sqrt, unvec, vec as vectorize, Matrix};
use crate::sde::{linearize, LinearizationData, Moments, SdeProblem, TimeGrid};
use crate::{Error, Result};

/// Default RK4 substeps per step for [`step_moments_ode`].
pub const ODE_SUBSTEPS: usize = 64;

/// One step of a weak scheme on a fixed grid.
pub trait Stepper: Sync {
    /// Length of the `eta` vector consumed per step.
    fn noise_dim(&self) -> usize;

    /// Advances `z` (the state at grid node `n`) to node `n + 1`.
    fn step(&self, n: usize, z: &[f64], eta: &[f64]) -> Result<Vec<f64>>;
}

/// `M`, `u` and the selectors with `mu = z + L2 e^{Mh} u` and
/// `vec(sigma) = L1 e^{Mh} u`.
///
/// Row/column blocks have sizes `d², d+2, d+2, 1, 1, 1`.
#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    pub m: Matrix,
    pub u: Vec<f64>,
    pub l1: Matrix,
    pub l2: Matrix,
    dim: usize,
}

impl AugmentedSystem {
    /// `d² + 2d + 7`.
    pub fn size_for(d: usize) -> usize {
        d * d + 2 * d + 7
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn mean_offset(d: usize) -> usize {
        d * d + d + 2
    }
}

/// Assembles the augmented system for the linearization `lin` anchored at `z`.
pub fn build_augmented(lin: &LinearizationData, z: &[f64]) -> Result<AugmentedSystem> {
    let d = lin.dim();
    if z.len() != d {
        return Err(Error::Length {
            op: "build_augmented",
            expected: d,
            got: z.len(),
        });
    }
    let m_noise = lin.noise_dim();
    let d2 = d * d;
    let n = AugmentedSystem::size_for(d);
    let (o2, o3) = (d2, d2 + d + 2);
    let (o4, o5, o6) = (o3 + d + 2, o3 + d + 3, o3 + d + 4);

    let b0 = &lin.jac[0];
    let col = |v: &[f64]| Matrix::column(v);

    // A = B0 ⊕ B0 + Σ B^k ⊗ B^k, the generator of vec(σ) under
    // σ ↦ B0 σ + σ B0ᵀ + Σ B^k σ B^kᵀ with column-stacking vec.
    let mut a = kron_sum(b0, b0)?;
    for k in 1..=m_noise {
        a.add_assign(&kron(&lin.jac[k], &lin.jac[k])?);
    }

    let mut beta1 = Matrix::zeros(d, d);
    let mut beta2 = Matrix::zeros(d, d);
    let mut beta3 = Matrix::zeros(d, d);
    let mut beta4 = kron_sum(&col(&lin.b_const[0]), &col(&lin.b_const[0]))?;
    let mut beta5 = kron_sum(&col(&lin.b_slope[0]), &col(&lin.b_slope[0]))?;
    for k in 1..=m_noise {
        let (c, s) = (&lin.b_const[k], &lin.b_slope[k]);
        beta1.add_assign(&Matrix::outer(c, c));
        beta2.add_assign(&Matrix::outer(c, s).add(&Matrix::outer(s, c)));
        beta3.add_assign(&Matrix::outer(s, s));
        let bk = &lin.jac[k];
        beta4.add_assign(&kron(&col(c), bk)?.add(&kron(bk, &col(c))?));
        beta5.add_assign(&kron(&col(s), bk)?.add(&kron(bk, &col(s))?));
    }

    // C = [[B0, b^{0,1}, B0 z + b^{0,0}], [0, 0, 1], [0, 0, 0]]
    let mut c = Matrix::zeros(d + 2, d + 2);
    c.set_block(0, 0, b0);
    let forcing: Vec<f64> = b0
        .mat_vec(z)
        .iter()
        .zip(&lin.b_const[0])
        .map(|(bz, b)| bz + b)
        .collect();
    for i in 0..d {
        c[(i, d)] = lin.b_slope[0][i];
        c[(i, d + 1)] = forcing[i];
    }
    c[(d, d + 1)] = 1.0;

    let beta4_z = beta4.mat_vec(z);
    let beta5_z = beta5.mat_vec(z);
    let big_b1: Vec<f64> = vectorize(&beta1)
        .iter()
        .zip(&beta4_z)
        .map(|(a, b)| a + b)
        .collect();
    let big_b2: Vec<f64> = vectorize(&beta2)
        .iter()
        .zip(&beta5_z)
        .map(|(a, b)| a + b)
        .collect();
    let big_b3 = vectorize(&beta3);

    let mut m = Matrix::zeros(n, n);
    m.set_block(0, 0, &a);
    // B5 = β5 𝓛 and B4 = β4 𝓛 with 𝓛 = [I_d, 0]: only the first d columns are nonzero.
    m.set_block(0, o2, &beta5);
    m.set_block(0, o3, &beta4);
    m.set_block(0, o4, &col(&big_b3));
    m.set_block(0, o5, &col(&big_b2));
    m.set_block(0, o6, &col(&big_b1));
    m.set_block(o2, o2, &c);
    m.set_block(o2, o3, &Matrix::identity(d + 2));
    m.set_block(o3, o3, &c);
    m[(o4, o5)] = 2.0;
    m[(o5, o6)] = 1.0;

    let mut u = vectorize(&Matrix::outer(z, z));
    u.resize(n, 0.0);
    u[o3 + d + 1] = 1.0;
    u[o6] = 1.0;

    let mut l1 = Matrix::zeros(d2, n);
    l1.set_block(0, 0, &Matrix::identity(d2));
    let mut l2 = Matrix::zeros(d, n);
    l2.set_block(0, AugmentedSystem::mean_offset(d), &Matrix::identity(d));

    Ok(AugmentedSystem { m, u, l1, l2, dim: d })
}

/// Conditional moments of the linearized SDE at the end of a step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMoments {
    pub mu: Vec<f64>,
    pub sigma: Matrix,
    /// `sigma - mu muᵀ`, symmetrized.
    pub cov: Matrix,
    /// Symmetric PSD factor with `sqrt_cov sqrt_covᵀ = cov`.
    pub sqrt_cov: Matrix,
}

impl StepMoments {
    /// Symmetrizes `sigma` and fills in the covariance and its square root.
    pub fn new(mu: Vec<f64>, sigma: Matrix) -> Result<Self> {
        if !sigma.is_finite() || mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "step moments",
            });
        }
        let sigma = sigma.symmetrized();
        let cov = sigma.sub(&Matrix::outer(&mu, &mu)).symmetrized();
        let sqrt_cov = psd_sqrt(&cov)?;
        Ok(Self {
            mu,
            sigma,
            cov,
            sqrt_cov,
        })
    }

    pub fn moments(&self) -> Moments {
        Moments {
            mean: self.mu.clone(),
            second: self.sigma.clone(),
        }
    }
}

/// `mu = z + L2 e^{Mh} u`, `vec(sigma) = L1 e^{Mh} u`.
pub fn step_moments_expm(aug: &AugmentedSystem, z: &[f64], h: f64) -> Result<StepMoments> {
    if !(h >= 0.0) {
        return Err(Error::InvalidArgument("step size must be non-negative"));
    }
    let w = expm(&aug.m.scale(h))?.mat_vec(&aug.u);
    let mu: Vec<f64> = z.iter().zip(aug.l2.mat_vec(&w)).map(|(a, b)| a + b).collect();
    let sigma = unvec(&aug.l1.mat_vec(&w), aug.dim)?;
    StepMoments::new(mu, sigma)
}

/// Right-hand side of the moment ODEs at offset `s` from the anchor time:
/// `mu' = B0 mu + b0(s)` and
/// `sigma' = sigma B0ᵀ + B0 sigma + mu b0ᵀ + b0 muᵀ
///         + Σ_k (Bk sigma Bkᵀ + Bk mu bkᵀ + bk muᵀ Bkᵀ + bk bkᵀ)`.
fn moment_rhs(lin: &LinearizationData, s: f64, mu: &[f64], sigma: &Matrix) -> (Vec<f64>, Matrix) {
    let time = lin.tau + s;
    let b0 = &lin.jac[0];
    let bvec0 = lin.b_at(0, time);
    let dmu: Vec<f64> = b0.mat_vec(mu).iter().zip(&bvec0).map(|(a, b)| a + b).collect();

    let mut dsigma = sigma.matmul(&b0.transpose());
    dsigma.add_assign(&b0.matmul(sigma));
    dsigma.add_assign(&Matrix::outer(mu, &bvec0));
    dsigma.add_assign(&Matrix::outer(&bvec0, mu));
    for k in 1..=lin.noise_dim() {
        let bk = &lin.jac[k];
        let bvec = lin.b_at(k, time);
        let bk_mu = bk.mat_vec(mu);
        dsigma.add_assign(&bk.matmul(sigma).matmul(&bk.transpose()));
        dsigma.add_assign(&Matrix::outer(&bk_mu, &bvec));
        dsigma.add_assign(&Matrix::outer(&bvec, &bk_mu));
        dsigma.add_assign(&Matrix::outer(&bvec, &bvec));
    }
    (dmu, dsigma)
}

/// Classical RK4 on the moment ODEs from `(z, z zᵀ)` over `[0, h]`.
pub fn step_moments_ode(lin: &LinearizationData, z: &[f64], h: f64, substeps: usize) -> Result<StepMoments> {
    if substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be at least 1"));
    }
    if !(h >= 0.0) {
        return Err(Error::InvalidArgument("step size must be non-negative"));
    }
    let dt = h / substeps as f64;
    let axpy =
        |x: &[f64], a: f64, y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(xi, yi)| xi + a * yi).collect() };
    let mut mu = z.to_vec();
    let mut sigma = Matrix::outer(z, z);
    for i in 0..substeps {
        let s = i as f64 * dt;
        let (k1m, k1s) = moment_rhs(lin, s, &mu, &sigma);
        let (k2m, k2s) = moment_rhs(
            lin,
            s + 0.5 * dt,
            &axpy(&mu, 0.5 * dt, &k1m),
            &sigma.add(&k1s.scale(0.5 * dt)),
        );
        let (k3m, k3s) = moment_rhs(
            lin,
            s + 0.5 * dt,
            &axpy(&mu, 0.5 * dt, &k2m),
            &sigma.add(&k2s.scale(0.5 * dt)),
        );
        let (k4m, k4s) = moment_rhs(lin, s + dt, &axpy(&mu, dt, &k3m), &sigma.add(&k3s.scale(dt)));
        for j in 0..mu.len() {
            mu[j] += dt / 6.0 * (k1m[j] + 2.0 * k2m[j] + 2.0 * k3m[j] + k4m[j]);
        }
        let mut inc = k1s;
        inc.add_assign(&k2s.scale(2.0));
        inc.add_assign(&k3s.scale(2.0));
        inc.add_assign(&k4s);
        sigma.add_assign(&inc.scale(dt / 6.0));
    }
    StepMoments::new(mu, sigma)
}

/// `z' = mu + sqrt_cov eta`.
pub fn ll_step(sm: &StepMoments, eta: &[f64]) -> Vec<f64> {
    let noise = sm.sqrt_cov.mat_vec(eta);
    sm.mu.iter().zip(noise).map(|(m, n)| m + n).collect()
}

/// Moments of one LL step for a linearization whose coefficients do not
/// depend on the anchor state: `mu = F z + g`,
/// `vec(sigma) = P vec(z zᵀ) + Q z + c`.
#[derive(Debug, Clone)]
pub struct AffineMomentMap {
    mean_lin: Matrix,
    mean_off: Vec<f64>,
    second_quad: Matrix,
    second_lin: Matrix,
    second_off: Vec<f64>,
}

impl AffineMomentMap {
    /// Built from `d + 1` exponentials: anchors `0` and the unit vectors.
    /// `lin` must come from a state-independent linearization.
    pub fn new(lin: &LinearizationData, h: f64) -> Result<Self> {
        let d = lin.dim();
        let d2 = d * d;
        let p_off = AugmentedSystem::mean_offset(d);
        let propagate = |z: &[f64]| -> Result<Vec<f64>> {
            let aug = build_augmented(lin, z)?;
            Ok(expm(&aug.m.scale(h))?.mat_vec(&aug.u))
        };

        let origin = vec![0.0; d];
        let aug0 = build_augmented(lin, &origin)?;
        let e0 = expm(&aug0.m.scale(h))?;
        let w0 = e0.mat_vec(&aug0.u);
        let second_quad = e0.block(0, 0, d2, d2);
        let mean_off = w0[p_off..p_off + d].to_vec();
        let second_off = w0[..d2].to_vec();

        let mut mean_lin = Matrix::zeros(d, d);
        let mut second_lin = Matrix::zeros(d2, d);
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            let w = propagate(&e)?;
            let quad = second_quad.mat_vec(&vectorize(&Matrix::outer(&e, &e)));
            for r in 0..d {
                mean_lin[(r, i)] = e[r] + w[p_off + r] - mean_off[r];
            }
            for r in 0..d2 {
                second_lin[(r, i)] = w[r] - quad[r] - second_off[r];
            }
        }
        Ok(Self {
            mean_lin,
            mean_off,
            second_quad,
            second_lin,
            second_off,
        })
    }

    fn dim(&self) -> usize {
        self.mean_off.len()
    }

    /// `(mu, vec(sigma))` given the anchor mean `z` and `vec(z zᵀ)` replaced
    /// by `vec_second`. By linearity this is also the map from `(E z, E z zᵀ)`
    /// to `(E mu, E sigma)`.
    fn apply_raw(&self, z: &[f64], vec_second: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mu: Vec<f64> = self
            .mean_lin
            .mat_vec(z)
            .iter()
            .zip(&self.mean_off)
            .map(|(a, b)| a + b)
            .collect();
        let quad = self.second_quad.mat_vec(vec_second);
        let lin = self.second_lin.mat_vec(z);
        let sigma = quad
            .iter()
            .zip(&lin)
            .zip(&self.second_off)
            .map(|((q, l), c)| q + l + c)
            .collect();
        (mu, sigma)
    }

    pub fn step_moments(&self, z: &[f64]) -> Result<StepMoments> {
        let (mu, sigma) = self.apply_raw(z, &vectorize(&Matrix::outer(z, z)));
        StepMoments::new(mu, unvec(&sigma, self.dim())?)
    }

    /// Pushes unconditional moments `(E z_n, E z_n z_nᵀ)` one step forward.
    pub fn propagate(&self, moments: &Moments) -> Result<Moments> {
        let (mean, sigma) = self.apply_raw(&moments.mean, &vectorize(&moments.second));
        Ok(Moments {
            mean,
            second: unvec(&sigma, self.dim())?.symmetrized(),
        })
    }
}

fn nearly_equal(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| libm::fabs(x - y) <= 1e-7 * (1.0 + libm::fabs(*x).max(libm::fabs(*y))))
}

fn same_coefficients(a: &LinearizationData, b: &LinearizationData) -> bool {
    a.jac.len() == b.jac.len()
        && a.jac
            .iter()
            .zip(&b.jac)
            .all(|(x, y)| nearly_equal(x.as_slice(), y.as_slice()))
        && a.b_const.iter().zip(&b.b_const).all(|(x, y)| nearly_equal(x, y))
        && a.b_slope.iter().zip(&b.b_slope).all(|(x, y)| nearly_equal(x, y))
}

/// Linearizes at `tau` around several probe states and returns the data
/// anchored at `x0` if every probe yields the same coefficients.
pub fn state_independent_linearization<P: SdeProblem + ?Sized>(p: &P, tau: f64) -> Result<LinearizationData> {
    let x0 = p.x0();
    let base = linearize(p, tau, &x0)?;
    let d = x0.len();
    let probes = [
        (0..d).map(|i| x0[i] + 1.0).collect::<Vec<_>>(),
        (0..d).map(|i| -0.5 * x0[i] + 0.3 * (i as f64 + 1.0)).collect(),
        (0..d).map(|i| 3.0 * x0[i] - 1.7 + 0.9 * i as f64).collect(),
    ];
    for z in &probes {
        if !same_coefficients(&base, &linearize(p, tau, z)?) {
            return Err(Error::StateDependent);
        }
    }
    Ok(base)
}

/// The weak LL scheme on a fixed grid.
///
/// When the linearization is state-independent and identical at every node
/// and the grid is uniform, the per-step moment map is built once and reused.
pub struct LlScheme<'a, P: ?Sized> {
    problem: &'a P,
    grid: &'a TimeGrid,
    cached: Option<AffineMomentMap>,
}

impl<'a, P: SdeProblem + ?Sized> LlScheme<'a, P> {
    pub fn new(problem: &'a P, grid: &'a TimeGrid) -> Result<Self> {
        let cached = match Self::cacheable(problem, grid) {
            Some((lin, h)) => Some(AffineMomentMap::new(&lin, h)?),
            None => None,
        };
        Ok(Self {
            problem,
            grid,
            cached,
        })
    }

    /// Never caches: every step linearizes and exponentiates afresh.
    pub fn uncached(problem: &'a P, grid: &'a TimeGrid) -> Self {
        Self {
            problem,
            grid,
            cached: None,
        }
    }

    fn cacheable(problem: &P, grid: &TimeGrid) -> Option<(LinearizationData, f64)> {
        let h = grid.uniform_step()?;
        let first = state_independent_linearization(problem, grid.start()).ok()?;
        let n = grid.steps();
        for idx in [n / 2, n - 1] {
            let other = state_independent_linearization(problem, grid.step(idx).0).ok()?;
            if !same_coefficients(&first, &other) {
                return None;
            }
        }
        Some((first, h))
    }

    pub fn is_cached(&self) -> bool {
        self.cached.is_some()
    }

    pub fn grid(&self) -> &TimeGrid {
        self.grid
    }

    /// Moments of the step leaving node `n` from state `z`.
    pub fn moments(&self, n: usize, z: &[f64]) -> Result<StepMoments> {
        if let Some(map) = &self.cached {
            return map.step_moments(z);
        }
        let (tau, h) = self.grid.step(n);
        let lin = linearize(self.problem, tau, z)?;
        let aug = build_augmented(&lin, z)?;
        step_moments_expm(&aug, z, h)
    }
}

impl<P: SdeProblem + ?Sized> Stepper for LlScheme<'_, P> {
    fn noise_dim(&self) -> usize {
        self.problem.dim()
    }

    fn step(&self, n: usize, z: &[f64], eta: &[f64]) -> Result<Vec<f64>> {
        let sm = self.moments(n, z).map_err(|e| Error::StepFailed {
            step: n,
            source: Box::new(e),
        })?;
        Ok(ll_step(&sm, eta))
    }
}

/// Runs the LL scheme from `z0` over `grid` with one ±1 vector of length
/// `d` per step; returns `z_0..=z_N`.
pub fn integrate_path<P: SdeProblem + ?Sized>(
    p: &P,
    z0: &[f64],
    grid: &TimeGrid,
    noise: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    if noise.len() != grid.steps() {
        return Err(Error::Length {
            op: "integrate_path noise",
            expected: grid.steps(),
            got: noise.len(),
        });
    }
    if let Some(bad) = noise.iter().find(|eta| eta.len() != p.dim()) {
        return Err(Error::Length {
            op: "integrate_path eta",
            expected: p.dim(),
            got: bad.len(),
        });
    }
    let scheme = LlScheme::new(p, grid)?;
    let mut path = Vec::with_capacity(grid.steps() + 1);
    path.push(z0.to_vec());
    for (n, eta) in noise.iter().enumerate() {
        let next = scheme.step(n, &path[n], eta)?;
        path.push(next);
    }
    Ok(path)
}

/// Exact mean and second moment of the LL iterates at every grid node,
/// without sampling. Only valid for linear SDEs, where the per-step moment
/// maps are affine; state-dependent linearizations are rejected.
pub fn moment_propagate<P: SdeProblem + ?Sized>(p: &P, grid: &TimeGrid) -> Result<Vec<Moments>> {
    let x0 = p.x0();
    let mut out = Vec::with_capacity(grid.steps() + 1);
    out.push(Moments {
        mean: x0.clone(),
        second: Matrix::outer(&x0, &x0),
    });
    let mut cached: Option<(LinearizationData, f64, AffineMomentMap)> = None;
    for n in 0..grid.steps() {
        let (tau, h) = grid.step(n);
        let lin = state_independent_linearization(p, tau)?;
        let reuse = matches!(&cached, Some((l, hc, _))
            if *hc == h && same_coefficients(l, &lin));
        if !reuse {
            let map = AffineMomentMap::new(&lin, h)?;
            cached = Some((lin, h, map));
        }
        let map = &cached.as_ref().expect("set above").2;
        let next = map.propagate(&out[n])?;
        out.push(next);
    }
    Ok(out)
}
