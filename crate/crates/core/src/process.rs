//! Forward diffusion processes.
//!
//! Two processes are supported. The passive process is an Ornstein-Uhlenbeck
//! relaxation of the data driven by white noise,
//!
//! ```text
//! dx = -k x dt + sqrt(2 T_p) dW
//! ```
//!
//! and the active process couples every data coordinate to an auxiliary
//! coordinate `eta` that is itself an Ornstein-Uhlenbeck process with
//! persistence time `tau`:
//!
//! ```text
//! dx   = (-k x + eta) dt + sqrt(2 T_p) dW_1
//! deta = -eta / tau dt  + sqrt(2 T_a) / tau dW_2
//! ```
//!
//! Both are linear, so the transition kernels are Gaussian with closed-form
//! moments ([`kernel_moments`], [`marginal_kernel_x0`]). Coordinates never
//! mix across dimensions: every per-dimension `(x_i, eta_i)` pair shares the
//! same 2×2 covariance.

use ndarray::{Array2, ArrayView2, Zip};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::special::{exp_integral, expm1_ratio, lower_gamma_reg_int};

/// The covariance entries are summed from their Taylor series in
/// `d = k - 1/tau` (about `c = k + 1/tau`) when `(d/c)^2` is at most this
/// value, a band that contains the degenerate point `k = 1/tau`.
///
/// The closed forms divide by `d^2` and lose about `1e-16 / (d t)^2`
/// relative precision; inside the band the series converges at least as
/// fast as `SERIES_RATIO^n`.
pub const SERIES_RATIO: f64 = 0.5;

/// The series is also used for short times, `c t` at most this value,
/// where the closed forms cancel catastrophically for any `d`.
pub const SERIES_MAX_CT: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    Passive,
    Active,
}

/// Constants of a forward process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionParams {
    pub kind: ProcessKind,
    /// Stiffness of the harmonic confinement (1/time).
    pub k: f64,
    /// White-noise temperature acting directly on `x`. For the passive
    /// process this is its only temperature.
    #[serde(default)]
    pub t_p: f64,
    /// Temperature of the active (coloured) noise.
    #[serde(default)]
    pub t_a: f64,
    /// Persistence time of the active noise.
    #[serde(default)]
    pub tau: f64,
    /// Forward horizon.
    pub t_f: f64,
}

impl DiffusionParams {
    pub fn passive(k: f64, temperature: f64, t_f: f64) -> Self {
        Self {
            kind: ProcessKind::Passive,
            k,
            t_p: temperature,
            t_a: 0.0,
            tau: 0.0,
            t_f,
        }
    }

    /// Active process with `T_p = 0`, the setting used for all comparisons.
    pub fn active(k: f64, t_a: f64, tau: f64, t_f: f64) -> Self {
        Self {
            kind: ProcessKind::Active,
            k,
            t_p: 0.0,
            t_a,
            tau,
            t_f,
        }
    }

    pub fn with_passive_temperature(mut self, t_p: f64) -> Self {
        self.t_p = t_p;
        self
    }

    pub fn is_active(&self) -> bool {
        self.kind == ProcessKind::Active
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.k, self.t_p, self.t_a, self.tau, self.t_f]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("process constants must be finite"));
        }
        if self.k <= 0.0 {
            return Err(Error::invalid(format!("k must be positive, got {}", self.k)));
        }
        if self.t_f <= 0.0 {
            return Err(Error::invalid(format!("t_f must be positive, got {}", self.t_f)));
        }
        if self.t_p < 0.0 || self.t_a < 0.0 {
            return Err(Error::invalid("temperatures must be non-negative"));
        }
        if self.is_active() && self.tau <= 0.0 {
            return Err(Error::invalid(format!(
                "tau must be positive for the active process, got {}",
                self.tau
            )));
        }
        Ok(())
    }

    /// Variance of the stationary `eta` distribution, `T_a / tau`. Also the
    /// variance of the `eta_0` prior.
    pub fn eta_variance(&self) -> f64 {
        if self.is_active() {
            self.t_a / self.tau
        } else {
            0.0
        }
    }

    /// Noise amplitude on `x`: `sqrt(2 T_p)`.
    pub fn x_noise(&self) -> f64 {
        (2.0 * self.t_p).sqrt()
    }

    /// Noise amplitude on `eta`: `sqrt(2 T_a) / tau`.
    pub fn eta_noise(&self) -> f64 {
        if self.is_active() {
            (2.0 * self.t_a).sqrt() / self.tau
        } else {
            0.0
        }
    }

    /// Whether the `x`-score enters the reverse dynamics.
    pub fn needs_x_score(&self) -> bool {
        !self.is_active() || self.t_p > 0.0
    }

    /// Whether [`kernel_moments`] evaluates the series branch at time `t`.
    pub fn uses_series(&self, t: f64) -> bool {
        let c = self.k + 1.0 / self.tau;
        let d = self.k - 1.0 / self.tau;
        (d / c).powi(2) <= SERIES_RATIO || c * t <= SERIES_MAX_CT
    }
}

/// A point of the `2d`-dimensional diffusing state.
#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    pub x: Vec<f64>,
    /// Active coordinates; all zero for the passive process.
    pub eta: Vec<f64>,
    pub t: f64,
}

impl JointState {
    pub fn new(x: Vec<f64>, eta: Vec<f64>, t: f64) -> Result<Self> {
        ensure_dim(x.len(), eta.len())?;
        if !x.iter().chain(&eta).all(|v| v.is_finite()) || !t.is_finite() {
            return Err(Error::invalid("state entries must be finite"));
        }
        Ok(Self { x, eta, t })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Mean coefficients and covariance entries of a Gaussian transition kernel.
///
/// Conditional on `(x_0, eta_0)` the state at time `t` has mean
/// `(a x_0 + bcoef eta_0, b eta_0)` and per-dimension covariance
/// `[[m11, m12], [m12, m22]]`. For the passive process `m11` is the usual
/// `Delta_t = T/k (1 - e^{-2kt})` and the `eta` entries vanish.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelMoments {
    /// `e^{-kt}`
    pub a: f64,
    /// `e^{-t/tau}`
    pub b: f64,
    /// `(e^{-t/tau} - e^{-kt}) / (k - 1/tau)`
    pub bcoef: f64,
    pub m11: f64,
    pub m12: f64,
    pub m22: f64,
}

impl KernelMoments {
    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m12
    }

    /// Eigenvalues of the 2×2 covariance, ascending.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let half_tr = 0.5 * (self.m11 + self.m22);
        let diff = 0.5 * (self.m11 - self.m22);
        let r = diff.hypot(self.m12);
        (half_tr - r, half_tr + r)
    }

    /// Lower Cholesky factor `(l11, l21, l22)`; tolerates a singular matrix
    /// (e.g. at `t = 0`) by zeroing the degenerate directions.
    pub fn cholesky(&self) -> (f64, f64, f64) {
        let l11 = self.m11.max(0.0).sqrt();
        let l21 = if l11 > 0.0 { self.m12 / l11 } else { 0.0 };
        let l22 = (self.m22 - l21 * l21).max(0.0).sqrt();
        (l11, l21, l22)
    }

    /// Draw one centred `(x, eta)` pair from the covariance.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let (l11, l21, l22) = self.cholesky();
        let u1: f64 = rng.sample(StandardNormal);
        let u2: f64 = rng.sample(StandardNormal);
        (l11 * u1, l21 * u1 + l22 * u2)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() {
        return Err(Error::InvalidTime { t, reason: "time must be finite" });
    }
    if t < 0.0 {
        return Err(Error::InvalidTime { t, reason: "time must be non-negative" });
    }
    Ok(())
}

/// Moments of the forward kernel conditioned on `(x_0, eta_0)`.
pub fn kernel_moments(params: &DiffusionParams, t: f64) -> Result<KernelMoments> {
    params.validate()?;
    check_time(t)?;
    Ok(moments_at(params, t))
}

/// The `t → ∞` limit of [`kernel_moments`]: the stationary covariance.
pub fn stationary_moments(params: &DiffusionParams) -> Result<KernelMoments> {
    params.validate()?;
    Ok(moments_at(params, f64::INFINITY))
}

/// Moments of the kernel conditioned on `x_0` only, with `eta_0` integrated
/// over its stationary prior `N(0, T_a/tau)`. The mean is `(a x_0, 0)`.
pub fn marginal_moments(params: &DiffusionParams, t: f64) -> Result<KernelMoments> {
    params.validate()?;
    check_time(t)?;
    Ok(marginal_at(params, t))
}

pub(crate) fn marginal_at(params: &DiffusionParams, t: f64) -> KernelMoments {
    let mut m = moments_at(params, t);
    if params.is_active() {
        let g = params.eta_variance();
        m.m11 += g * m.bcoef * m.bcoef;
        m.m12 += g * m.b * m.bcoef;
        m.m22 += g * m.b * m.b;
    }
    m
}

/// Mean and covariance of the `x_0`-conditioned kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalKernel {
    pub mean_x: Vec<f64>,
    pub mean_eta: Vec<f64>,
    pub cov: KernelMoments,
}

pub fn marginal_kernel_x0(params: &DiffusionParams, t: f64, x0: &[f64]) -> Result<ConditionalKernel> {
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("x0 must be finite"));
    }
    let cov = marginal_moments(params, t)?;
    Ok(ConditionalKernel {
        mean_x: x0.iter().map(|v| cov.a * v).collect(),
        mean_eta: vec![0.0; x0.len()],
        cov,
    })
}

/// Evaluates the kernel moments, accepting `t = +inf`.
pub(crate) fn moments_at(params: &DiffusionParams, t: f64) -> KernelMoments {
    let k = params.k;
    let a = (-k * t).exp();
    // T_p / k (1 - a^2), the white-noise contribution to m11.
    let white = params.t_p * exp_integral(2.0 * k, t) * 2.0;
    if !params.is_active() {
        return KernelMoments { a, b: 0.0, bcoef: 0.0, m11: white, m12: 0.0, m22: 0.0 };
    }
    let mut m = if params.uses_series(t) {
        active_series(params, t)
    } else {
        active_closed(params, t)
    };
    m.m11 += white;
    m
}

/// Closed form of the `eta`-driven covariance.
///
/// With `E(alpha) = (1 - e^{-alpha t}) / alpha`, `c = k + 1/tau` and
/// `d = k - 1/tau`, the rates `2k`, `c`, `2/tau` are equally spaced by `d`
/// and the covariance entries are divided differences of `E`:
///
/// ```text
/// m22 = s2 E(2/tau)
/// m12 = s2 [E(c - d) - E(c)] / d
/// m11 = s2 [E(c + d) - 2 E(c) + E(c - d)] / d^2
/// ```
///
/// with `s2 = 2 T_a / tau^2`. Algebraically identical to the textbook
/// expressions in `a`, `b`, `c`, `d`.
pub(crate) fn active_closed(params: &DiffusionParams, t: f64) -> KernelMoments {
    let (k, tau) = (params.k, params.tau);
    let s2 = 2.0 * params.t_a / (tau * tau);
    let c = k + 1.0 / tau;
    let d = k - 1.0 / tau;
    let a = (-k * t).exp();
    let b = (-t / tau).exp();
    let e_lo = exp_integral(2.0 / tau, t);
    let e_mid = exp_integral(c, t);
    let e_hi = exp_integral(2.0 * k, t);
    KernelMoments {
        a,
        b,
        bcoef: a * expm1_ratio(d, t),
        m11: s2 * (e_hi - 2.0 * e_mid + e_lo) / (d * d),
        m12: s2 * (e_lo - e_mid) / d,
        m22: s2 * e_lo,
    }
}

/// Taylor expansion of the divided differences about `c`:
///
/// ```text
/// m12 = s2 sum_{n>=1} d^{n-1} I_n(c) / n!
/// m11 = 2 s2 sum_{m>=1} d^{2m-2} I_{2m}(c) / (2m)!
/// I_n(c) / n! = P(n+1, c t) / c^{n+1}
/// ```
///
/// Terms are bounded by both `(d/c)^n / c` and `|d|^n t^{n+1} / (n+1)!`,
/// so the sum converges for all valid parameters and quickly inside the
/// series band. `I_n` goes through the regularized incomplete gamma, which
/// keeps full relative precision as `t → 0`.
pub(crate) fn active_series(params: &DiffusionParams, t: f64) -> KernelMoments {
    const MAX_TERMS: u32 = 400;
    let (k, tau) = (params.k, params.tau);
    let s2 = 2.0 * params.t_a / (tau * tau);
    let c = k + 1.0 / tau;
    let d = k - 1.0 / tau;
    let ct = c * t;
    // I_n(c) / n!
    let moment = |n: u32| lower_gamma_reg_int(n, ct) / c.powi(n as i32 + 1);

    let mut m12 = 0.0;
    let mut dpow = 1.0;
    for n in 1..=MAX_TERMS {
        let term = dpow * moment(n);
        m12 += term;
        if term.abs() <= 1e-18 * m12.abs() {
            break;
        }
        dpow *= d;
    }
    let mut m11 = 0.0;
    let mut d2pow = 1.0;
    for m in 1..=MAX_TERMS / 2 {
        let term = d2pow * moment(2 * m);
        m11 += term;
        if term <= 1e-18 * m11 {
            break;
        }
        d2pow *= d * d;
    }
    let a = (-k * t).exp();
    KernelMoments {
        a,
        b: (-t / tau).exp(),
        bcoef: if t.is_infinite() { 0.0 } else { a * expm1_ratio(d, t) },
        m11: 2.0 * s2 * m11,
        m12: s2 * m12,
        m22: s2 * exp_integral(2.0 / tau, t),
    }
}

/// Euler-Maruyama forward path from `x0` with `eta_0` drawn from its
/// stationary prior. Returns `n_steps + 1` states including the start.
pub fn forward_path<R: Rng + ?Sized>(
    params: &DiffusionParams,
    x0: &[f64],
    dt: f64,
    n_steps: usize,
    rng: &mut R,
) -> Result<Vec<JointState>> {
    params.validate()?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let d = x0.len();
    let eta_sd = params.eta_variance().sqrt();
    let mut x = x0.to_vec();
    let mut eta: Vec<f64> = (0..d).map(|_| eta_sd * rng.sample::<f64, _>(StandardNormal)).collect();
    let (sx, se) = (params.x_noise() * dt.sqrt(), params.eta_noise() * dt.sqrt());
    let mut path = Vec::with_capacity(n_steps + 1);
    path.push(JointState { x: x.clone(), eta: eta.clone(), t: 0.0 });
    for step in 1..=n_steps {
        for i in 0..d {
            let xi = x[i];
            let ei = eta[i];
            let nx: f64 = if sx > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
            x[i] = xi + (-params.k * xi + ei) * dt + sx * nx;
            if params.is_active() {
                let ne: f64 = rng.sample(StandardNormal);
                eta[i] = ei - ei / params.tau * dt + se * ne;
            }
        }
        path.push(JointState { x: x.clone(), eta: eta.clone(), t: step as f64 * dt });
    }
    Ok(path)
}

/// One-shot draw from the kernel conditioned on `(x0, eta0)`.
pub fn forward_exact<R: Rng + ?Sized>(
    params: &DiffusionParams,
    x0: &[f64],
    eta0: &[f64],
    t: f64,
    rng: &mut R,
) -> Result<JointState> {
    ensure_dim(x0.len(), eta0.len())?;
    let m = kernel_moments(params, t)?;
    let mut x = Vec::with_capacity(x0.len());
    let mut eta = Vec::with_capacity(x0.len());
    for (&xi, &ei) in x0.iter().zip(eta0) {
        let (nx, ne) = m.draw(rng);
        x.push(m.a * xi + m.bcoef * ei + nx);
        eta.push(if params.is_active() { m.b * ei + ne } else { 0.0 });
    }
    Ok(JointState { x, eta, t })
}

/// One-shot draw from the `x_0`-conditioned kernel (`eta_0` marginalized).
pub fn forward_exact_marginal<R: Rng + ?Sized>(
    params: &DiffusionParams,
    x0: &[f64],
    t: f64,
    rng: &mut R,
) -> Result<JointState> {
    let kernel = marginal_kernel_x0(params, t, x0)?;
    let mut x = kernel.mean_x;
    let mut eta = kernel.mean_eta;
    for (xi, ei) in x.iter_mut().zip(eta.iter_mut()) {
        let (nx, ne) = kernel.cov.draw(rng);
        *xi += nx;
        if params.is_active() {
            *ei += ne;
        }
    }
    Ok(JointState { x, eta, t })
}

/// Draw the reverse-process starting point from the stationary Gaussian.
pub fn prior_sample<R: Rng + ?Sized>(params: &DiffusionParams, dim: usize, rng: &mut R) -> Result<JointState> {
    let m = stationary_moments(params)?;
    let mut x = Vec::with_capacity(dim);
    let mut eta = Vec::with_capacity(dim);
    for _ in 0..dim {
        let (nx, ne) = m.draw(rng);
        x.push(nx);
        eta.push(if params.is_active() { ne } else { 0.0 });
    }
    Ok(JointState { x, eta, t: params.t_f })
}

/// Drift of the reverse-time dynamics in `s = t_f - t`.
///
/// ```text
/// dx/ds   = k x - eta + 2 T_p F_x
/// deta/ds = eta / tau + (2 T_a / tau^2) F_eta
/// ```
///
/// For the passive process `dx/ds = k x + 2 T F_x` and the `eta` drift is
/// zero. `score_x` may be empty when it does not enter (active, `T_p = 0`);
/// `score_eta` may be empty for the passive process.
pub fn reverse_drift(
    params: &DiffusionParams,
    state: &JointState,
    score_x: &[f64],
    score_eta: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = state.dim();
    ensure_dim(d, state.eta.len())?;
    if params.needs_x_score() {
        ensure_dim(d, score_x.len())?;
    }
    if params.is_active() {
        ensure_dim(d, score_eta.len())?;
    }
    let x = ArrayView2::from_shape((1, d), &state.x).expect("row view");
    let eta = ArrayView2::from_shape((1, d), &state.eta).expect("row view");
    let sx = params
        .needs_x_score()
        .then(|| ArrayView2::from_shape((1, d), score_x).expect("row view"));
    let se = params
        .is_active()
        .then(|| ArrayView2::from_shape((1, d), score_eta).expect("row view"));
    let (dx, deta) = reverse_drift_batch(params, x, eta, sx, se);
    Ok((dx.into_raw_vec_and_offset().0, deta.into_raw_vec_and_offset().0))
}

/// Row-batched [`reverse_drift`]. Shapes are assumed consistent.
pub fn reverse_drift_batch(
    params: &DiffusionParams,
    x: ArrayView2<f64>,
    eta: ArrayView2<f64>,
    score_x: Option<ArrayView2<f64>>,
    score_eta: Option<ArrayView2<f64>>,
) -> (Array2<f64>, Array2<f64>) {
    let k = params.k;
    let mut dx = x.mapv(|v| k * v);
    let mut deta = Array2::zeros(eta.raw_dim());
    if let Some(sx) = score_x {
        let c = 2.0 * params.t_p;
        Zip::from(&mut dx).and(&sx).for_each(|d, &s| *d += c * s);
    }
    if params.is_active() {
        dx -= &eta;
        let inv_tau = 1.0 / params.tau;
        let c = 2.0 * params.t_a / (params.tau * params.tau);
        match score_eta {
            Some(se) => Zip::from(&mut deta)
                .and(&eta)
                .and(&se)
                .for_each(|d, &e, &s| *d = e * inv_tau + c * s),
            None => Zip::from(&mut deta).and(&eta).for_each(|d, &e| *d = e * inv_tau),
        }
    }
    (dx, deta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_relative_eq;

    fn active(tau: f64, t_a: f64) -> DiffusionParams {
        DiffusionParams::active(1.0, t_a, tau, 1.0)
    }

    /// Direct transcription of the covariance in terms of the decay factors
    /// `a = e^{-kt}`, `b = e^{-t/tau}` and the rates `c = k + 1/tau`,
    /// `d = k - 1/tau`.
    fn textbook(p: &DiffusionParams, t: f64) -> (f64, f64, f64) {
        let (k, tau, ta) = (p.k, p.tau, p.t_a);
        let a = (-k * t).exp();
        let b = (-t / tau).exp();
        let c = k + 1.0 / tau;
        let d = k - 1.0 / tau;
        let m11 = p.t_p / k * (1.0 - a * a)
            + ta / (tau * tau) * (tau / (k * c) + (4.0 * a * b / c - b * b * tau - a * a / k) / (d * d));
        let m12 = ta / (tau * c * d) * (k * (1.0 - b * b) - (1.0 + b * b - 2.0 * a * b) / tau);
        let m22 = ta / tau * (1.0 - b * b);
        (m11, m12, m22)
    }

    #[test]
    fn point_mass_at_time_zero() {
        let m = kernel_moments(&active(0.5, 1.0), 0.0).unwrap();
        assert_eq!((m.a, m.b, m.bcoef), (1.0, 1.0, 0.0));
        assert_eq!((m.m11, m.m12, m.m22), (0.0, 0.0, 0.0));
    }

    #[test]
    fn stationary_limits() {
        let p = active(0.5, 1.0);
        let m = stationary_moments(&p).unwrap();
        assert_relative_eq!(m.m22, 2.0, max_relative = 1e-14);
        assert_relative_eq!(m.m12, 1.0 / (0.5 * 3.0), max_relative = 1e-14);
        assert_relative_eq!(m.m11, 1.0 / (1.0 * 1.5), max_relative = 1e-14);
        let late = kernel_moments(&p, 60.0).unwrap();
        assert_relative_eq!(late.m11, m.m11, max_relative = 1e-12);
        assert_relative_eq!(late.m12, m.m12, max_relative = 1e-12);
    }

    #[test]
    fn closed_form_matches_textbook_expressions() {
        for &tau in &[0.25, 0.5, 2.0, 5.0] {
            let p = active(tau, 0.7).with_passive_temperature(0.3);
            for &t in &[0.05, 0.3, 1.0, 4.0] {
                let m = kernel_moments(&p, t).unwrap();
                let (m11, m12, m22) = textbook(&p, t);
                assert_relative_eq!(m.m11, m11, max_relative = 1e-9);
                assert_relative_eq!(m.m12, m12, max_relative = 1e-9);
                assert_relative_eq!(m.m22, m22, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn branches_agree_at_the_series_boundary() {
        let k = 1.3;
        // (d/c)^2 = SERIES_RATIO  <=>  d/c = ±sqrt(SERIES_RATIO)
        let r = SERIES_RATIO.sqrt();
        for &ratio in &[-r, r] {
            // d/c = (k tau - 1) / (k tau + 1)
            let tau = (1.0 + ratio) / (1.0 - ratio) / k;
            let p = DiffusionParams::active(k, 0.9, tau, 1.0);
            let c = k + 1.0 / tau;
            for &ct in &[SERIES_MAX_CT, 3.0, 10.0, 50.0] {
                let t = ct / c;
                let s = active_series(&p, t);
                let cl = active_closed(&p, t);
                for (u, v) in [(s.m11, cl.m11), (s.m12, cl.m12), (s.m22, cl.m22), (s.bcoef, cl.bcoef)] {
                    assert_relative_eq!(u, v, max_relative = 1e-12);
                }
            }
            let s = active_series(&p, f64::INFINITY);
            let cl = active_closed(&p, f64::INFINITY);
            assert_relative_eq!(s.m11, cl.m11, max_relative = 1e-12);
            assert_relative_eq!(s.m12, cl.m12, max_relative = 1e-12);
        }
    }

    #[test]
    fn series_is_accurate_at_short_times() {
        // Leading behaviour: m22 ~ s2 t, m12 ~ s2 t^2 / 2, m11 ~ s2 t^3 / 3.
        let p = DiffusionParams::active(1.0, 1.0, 0.25, 1.0);
        let s2 = 2.0 / 0.0625;
        let t = 1e-7;
        let m = kernel_moments(&p, t).unwrap();
        assert_relative_eq!(m.m22, s2 * t, max_relative = 1e-6);
        assert_relative_eq!(m.m12, s2 * t * t / 2.0, max_relative = 1e-6);
        assert_relative_eq!(m.m11, s2 * t.powi(3) / 3.0, max_relative = 1e-6);
    }

    #[test]
    fn exactly_degenerate_is_finite_and_continuous() {
        let p = DiffusionParams::active(2.0, 1.0, 0.5, 1.0);
        let m = kernel_moments(&p, 0.7).unwrap();
        assert_relative_eq!(m.bcoef, 0.7 * (-1.4f64).exp(), max_relative = 1e-14);
        let near = DiffusionParams::active(2.0, 1.0, 0.5 * (1.0 + 1e-3), 1.0);
        let n = kernel_moments(&near, 0.7).unwrap();
        assert_relative_eq!(m.m11, n.m11, max_relative = 2e-3);
        assert_relative_eq!(m.m12, n.m12, max_relative = 2e-3);
    }

    #[test]
    fn marginal_kernel_at_time_zero_keeps_eta_prior() {
        let p = active(0.25, 0.04);
        let k = marginal_kernel_x0(&p, 0.0, &[1.0, -1.0]).unwrap();
        assert_eq!(k.mean_x, vec![1.0, -1.0]);
        assert_eq!((k.cov.m11, k.cov.m12), (0.0, 0.0));
        assert_relative_eq!(k.cov.m22, 0.16, max_relative = 1e-14);
    }

    #[test]
    fn marginal_kernel_closed_forms() {
        // With eta_0 at stationarity, m22 stays T_a/tau and
        // m12 = T_a/(tau c) (1 - ab) and
        // m11 = T_a/tau [1/(kc) - 2ab/(cd) + a^2/(kd)].
        for &tau in &[0.25, 0.5, 2.0] {
            let p = active(tau, 0.6);
            let (k, c, d) = (p.k, p.k + 1.0 / tau, p.k - 1.0 / tau);
            for &t in &[0.1, 0.5, 3.0] {
                let m = marginal_moments(&p, t).unwrap();
                let (a, b) = ((-k * t).exp(), (-t / tau).exp());
                let g = p.t_a / tau;
                assert_relative_eq!(m.m22, g, max_relative = 1e-12);
                assert_relative_eq!(m.m12, g / c * (1.0 - a * b), max_relative = 1e-10);
                let m11 = g * (1.0 / (k * c) - 2.0 * a * b / (c * d) + a * a / (k * d));
                assert_relative_eq!(m.m11, m11, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn passive_variance_is_delta() {
        let p = DiffusionParams::passive(2.0, 0.5, 1.0);
        let m = kernel_moments(&p, 0.3).unwrap();
        assert_relative_eq!(m.m11, 0.25 * (1.0 - (-1.2f64).exp()), max_relative = 1e-14);
        assert_eq!((m.m12, m.m22), (0.0, 0.0));
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let p = active(0.5, 1.0);
        assert!(matches!(kernel_moments(&p, f64::NAN), Err(Error::InvalidTime { .. })));
        assert!(matches!(kernel_moments(&p, -1.0), Err(Error::InvalidTime { .. })));
        assert!(kernel_moments(&active(0.0, 1.0), 0.1).is_err());
        assert!(kernel_moments(&DiffusionParams { k: f64::NAN, ..p }, 0.1).is_err());
        let mut r = rng::stream(0, 0);
        assert!(forward_path(&p, &[0.0], 0.0, 3, &mut r).is_err());
        assert!(forward_path(&p, &[0.0], -1e-3, 3, &mut r).is_err());
    }

    #[test]
    fn noiseless_forward_path_decays_exponentially() {
        let p = DiffusionParams::active(1.5, 0.0, 0.5, 1.0);
        let mut r = rng::stream(1, 0);
        let dt = 1e-4;
        let path = forward_path(&p, &[2.0, -1.0], dt, 10_000, &mut r).unwrap();
        let last = path.last().unwrap();
        // Euler is first order: (1 - k dt)^n vs e^{-k t}
        let expected = (1.0 - 1.5 * dt).powi(10_000);
        assert_relative_eq!(last.x[0], 2.0 * expected, max_relative = 1e-12);
        assert_relative_eq!(last.x[0], 2.0 * (-1.5f64).exp(), max_relative = 1e-3);
        assert_eq!(last.eta, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_temperature_prior_is_origin() {
        let p = DiffusionParams::active(1.0, 0.0, 0.5, 1.0);
        let s = prior_sample(&p, 3, &mut rng::stream(2, 0)).unwrap();
        assert_eq!(s.x, vec![0.0; 3]);
        assert_eq!(s.eta, vec![0.0; 3]);
    }

    #[test]
    fn reverse_drift_without_passive_noise() {
        let p = DiffusionParams::active(2.0, 1.0, 0.5, 1.0);
        let s = JointState::new(vec![1.0, -0.5], vec![0.25, 0.0], 0.4).unwrap();
        let (dx, deta) = reverse_drift(&p, &s, &[], &[0.0, 0.0]).unwrap();
        assert_eq!(dx, vec![2.0 - 0.25, -1.0]);
        assert_eq!(deta, vec![0.5, 0.0]);
        assert!(matches!(
            reverse_drift(&p, &s, &[], &[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn passive_reverse_drift() {
        let p = DiffusionParams::passive(1.0, 0.5, 1.0);
        let s = JointState::new(vec![1.0], vec![0.0], 0.4).unwrap();
        let (dx, _) = reverse_drift(&p, &s, &[-2.0], &[]).unwrap();
        assert_eq!(dx, vec![1.0 - 2.0]);
        assert!(reverse_drift(&p, &s, &[], &[]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn covariance_is_psd(
                k in 0.05f64..8.0,
                tau in 0.02f64..10.0,
                t_a in 0.0f64..5.0,
                t_p in 0.0f64..2.0,
                t in 0.0f64..20.0,
            ) {
                let p = DiffusionParams::active(k, t_a, tau, 1.0).with_passive_temperature(t_p);
                for m in [kernel_moments(&p, t).unwrap(), marginal_moments(&p, t).unwrap()] {
                    let (lo, hi) = m.eigenvalues();
                    let trace = m.m11 + m.m22;
                    prop_assert!(lo >= -1e-12 * trace, "lo={lo} hi={hi}");
                    prop_assert!(m.m11.is_finite() && m.m12.is_finite() && m.m22.is_finite());
                }
            }
        }
    }
}
