//! Closed-form time-dependent densities and scores of Gaussian-mixture
//! targets pushed through the forward processes.
//!
//! Every peak stays Gaussian under a linear forward process. For the passive
//! process peak `alpha` evolves to `N(a mu, Delta + a^2 h)` per dimension.
//! For the active process, with `eta_0` drawn from its stationary prior, each
//! `(x_i, eta_i)` pair of peak `alpha` is bivariate normal with mean
//! `(a mu_i, 0)` and covariance
//!
//! ```text
//! [[k3, k2], [k2, k1]]   k1 = m22', k2 = m12', k3 = m11' + a^2 h_i
//! ```
//!
//! where `m'` are the `x_0`-conditioned kernel moments. The mixture density
//! is a weighted sum evaluated with log-sum-exp; scores are
//! responsibility-weighted sums of the per-peak Gaussian scores.

use ndarray::{Array2, ArrayView2};

use crate::error::{ensure_dim, Error, Result};
use crate::mixture::GaussianMixture;
use crate::process::{marginal_at, moments_at, DiffusionParams, ProcessKind};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Scores are evaluated no earlier than this fraction of `t_f`.
pub const MIN_TIME_FRACTION: f64 = 1e-8;

/// `(∂ log P / ∂x, ∂ log P / ∂eta)` at one state.
#[derive(Clone, Debug, PartialEq)]
pub struct ActiveScorePair {
    pub f_x: Vec<f64>,
    pub f_eta: Vec<f64>,
}

fn clamp_time(params: &DiffusionParams, t: f64) -> Result<f64> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidTime { t, reason: "score time must be finite and non-negative" });
    }
    Ok(t.max(MIN_TIME_FRACTION * params.t_f))
}

fn check_kind(params: &DiffusionParams, kind: ProcessKind) -> Result<()> {
    params.validate()?;
    if params.kind != kind {
        return Err(Error::invalid(format!("expected a {kind:?} process, got {:?}", params.kind)));
    }
    Ok(())
}

/// Per-time coefficients of the passive evolved mixture.
struct PassiveCoeffs {
    a: f64,
    delta: f64,
}

impl PassiveCoeffs {
    fn new(params: &DiffusionParams, t: f64) -> Self {
        let m = moments_at(params, t);
        Self { a: m.a, delta: m.m11 }
    }
}

/// Writes per-peak log weights for one point and returns the log-sum-exp.
fn passive_log_terms(mix: &GaussianMixture, c: &PassiveCoeffs, x: &[f64], logw: &mut Vec<f64>) -> f64 {
    logw.clear();
    for comp in mix.components() {
        let mut lw = comp.weight.ln();
        for ((&xi, &mu), &var) in x.iter().zip(&comp.mean).zip(&comp.variance) {
            let v = c.delta + c.a * c.a * var;
            let r = xi - c.a * mu;
            lw -= 0.5 * (LN_2PI + v.ln() + r * r / v);
        }
        logw.push(lw);
    }
    log_sum_exp(logw)
}

/// Stable `log Σ exp(w)`, pivoting on the largest term.
pub(crate) fn log_sum_exp(w: &[f64]) -> f64 {
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + w.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-density of the passive evolved mixture at `x`.
pub fn passive_log_density(mix: &GaussianMixture, x: &[f64], t: f64, params: &DiffusionParams) -> Result<f64> {
    check_kind(params, ProcessKind::Passive)?;
    ensure_dim(mix.dim(), x.len())?;
    let t = clamp_time(params, t)?;
    let c = PassiveCoeffs::new(params, t);
    Ok(passive_log_terms(mix, &c, x, &mut Vec::with_capacity(mix.len())))
}

fn passive_score_into(mix: &GaussianMixture, c: &PassiveCoeffs, x: &[f64], logw: &mut Vec<f64>, out: &mut [f64]) {
    let lse = passive_log_terms(mix, c, x, logw);
    out.iter_mut().for_each(|v| *v = 0.0);
    for (comp, &lw) in mix.components().iter().zip(logw.iter()) {
        let r = (lw - lse).exp();
        for i in 0..x.len() {
            let v = c.delta + c.a * c.a * comp.variance[i];
            out[i] -= r * (x[i] - c.a * comp.mean[i]) / v;
        }
    }
}

/// `∇_x log P_t(x)` for the passive process.
pub fn passive_score(mix: &GaussianMixture, x: &[f64], t: f64, params: &DiffusionParams) -> Result<Vec<f64>> {
    check_kind(params, ProcessKind::Passive)?;
    ensure_dim(mix.dim(), x.len())?;
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("state must be finite"));
    }
    let t = clamp_time(params, t)?;
    let c = PassiveCoeffs::new(params, t);
    let mut out = vec![0.0; x.len()];
    passive_score_into(mix, &c, x, &mut Vec::with_capacity(mix.len()), &mut out);
    Ok(out)
}

/// Row-batched [`passive_score`].
pub fn passive_score_batch(
    mix: &GaussianMixture,
    x: ArrayView2<f64>,
    t: f64,
    params: &DiffusionParams,
) -> Result<Array2<f64>> {
    check_kind(params, ProcessKind::Passive)?;
    ensure_dim(mix.dim(), x.ncols())?;
    let t = clamp_time(params, t)?;
    let c = PassiveCoeffs::new(params, t);
    let mut out = Array2::zeros(x.raw_dim());
    let mut logw = Vec::with_capacity(mix.len());
    let mut row_buf = vec![0.0; x.ncols()];
    for (xr, mut or) in x.rows().into_iter().zip(out.rows_mut()) {
        let xs: Vec<f64> = xr.iter().copied().collect();
        passive_score_into(mix, &c, &xs, &mut logw, &mut row_buf);
        or.iter_mut().zip(&row_buf).for_each(|(o, &v)| *o = v);
    }
    Ok(out)
}

/// Per-time coefficients of the active evolved mixture.
struct ActiveCoeffs {
    a: f64,
    k1: f64,
    k2: f64,
    m11: f64,
}

impl ActiveCoeffs {
    fn new(params: &DiffusionParams, t: f64) -> Result<Self> {
        let m = marginal_at(params, t);
        if !(m.m22 > 0.0) {
            return Err(Error::invalid("active density is degenerate when T_a = 0"));
        }
        Ok(Self { a: m.a, k1: m.m22, k2: m.m12, m11: m.m11 })
    }

    /// `(k3, det)` for a peak variance `h`.
    fn peak(&self, h: f64) -> (f64, f64) {
        let k3 = self.m11 + self.a * self.a * h;
        (k3, self.k1 * k3 - self.k2 * self.k2)
    }
}

fn active_log_terms(
    mix: &GaussianMixture,
    c: &ActiveCoeffs,
    x: &[f64],
    eta: &[f64],
    logw: &mut Vec<f64>,
) -> f64 {
    logw.clear();
    for comp in mix.components() {
        let mut lw = comp.weight.ln();
        for i in 0..x.len() {
            let (k3, det) = c.peak(comp.variance[i]);
            let r = x[i] - c.a * comp.mean[i];
            let q = (c.k1 * r * r - 2.0 * c.k2 * r * eta[i] + k3 * eta[i] * eta[i]) / det;
            lw -= LN_2PI + 0.5 * det.ln() + 0.5 * q;
        }
        logw.push(lw);
    }
    log_sum_exp(logw)
}

fn active_score_into(
    mix: &GaussianMixture,
    c: &ActiveCoeffs,
    x: &[f64],
    eta: &[f64],
    logw: &mut Vec<f64>,
    fx: &mut [f64],
    feta: &mut [f64],
) {
    let lse = active_log_terms(mix, c, x, eta, logw);
    fx.iter_mut().for_each(|v| *v = 0.0);
    feta.iter_mut().for_each(|v| *v = 0.0);
    for (comp, &lw) in mix.components().iter().zip(logw.iter()) {
        let resp = (lw - lse).exp();
        for i in 0..x.len() {
            let (k3, det) = c.peak(comp.variance[i]);
            let r = x[i] - c.a * comp.mean[i];
            fx[i] -= resp * (c.k1 * r - c.k2 * eta[i]) / det;
            feta[i] -= resp * (k3 * eta[i] - c.k2 * r) / det;
        }
    }
}

fn check_active_state(mix: &GaussianMixture, x: &[f64], eta: &[f64]) -> Result<()> {
    ensure_dim(mix.dim(), x.len())?;
    ensure_dim(mix.dim(), eta.len())?;
    if !x.iter().chain(eta).all(|v| v.is_finite()) {
        return Err(Error::invalid("state must be finite"));
    }
    Ok(())
}

/// Joint log-density `log P_t(x, eta)` of the active evolved mixture.
pub fn active_log_density(
    mix: &GaussianMixture,
    x: &[f64],
    eta: &[f64],
    t: f64,
    params: &DiffusionParams,
) -> Result<f64> {
    check_kind(params, ProcessKind::Active)?;
    check_active_state(mix, x, eta)?;
    let t = clamp_time(params, t)?;
    let c = ActiveCoeffs::new(params, t)?;
    Ok(active_log_terms(mix, &c, x, eta, &mut Vec::with_capacity(mix.len())))
}

/// `(∇_x, ∇_eta) log P_t(x, eta)` for the active process.
pub fn active_joint_score(
    mix: &GaussianMixture,
    x: &[f64],
    eta: &[f64],
    t: f64,
    params: &DiffusionParams,
) -> Result<ActiveScorePair> {
    check_kind(params, ProcessKind::Active)?;
    check_active_state(mix, x, eta)?;
    let t = clamp_time(params, t)?;
    let c = ActiveCoeffs::new(params, t)?;
    let mut f_x = vec![0.0; x.len()];
    let mut f_eta = vec![0.0; x.len()];
    active_score_into(mix, &c, x, eta, &mut Vec::with_capacity(mix.len()), &mut f_x, &mut f_eta);
    Ok(ActiveScorePair { f_x, f_eta })
}

/// Row-batched [`active_joint_score`]; returns `(f_x, f_eta)`.
pub fn active_score_batch(
    mix: &GaussianMixture,
    x: ArrayView2<f64>,
    eta: ArrayView2<f64>,
    t: f64,
    params: &DiffusionParams,
) -> Result<(Array2<f64>, Array2<f64>)> {
    check_kind(params, ProcessKind::Active)?;
    ensure_dim(mix.dim(), x.ncols())?;
    ensure_dim(x.ncols(), eta.ncols())?;
    ensure_dim(x.nrows(), eta.nrows())?;
    let t = clamp_time(params, t)?;
    let c = ActiveCoeffs::new(params, t)?;
    let d = x.ncols();
    let mut fx = Array2::zeros(x.raw_dim());
    let mut fe = Array2::zeros(x.raw_dim());
    let mut logw = Vec::with_capacity(mix.len());
    let (mut xs, mut es) = (vec![0.0; d], vec![0.0; d]);
    let (mut bx, mut be) = (vec![0.0; d], vec![0.0; d]);
    for r in 0..x.nrows() {
        for i in 0..d {
            xs[i] = x[[r, i]];
            es[i] = eta[[r, i]];
        }
        active_score_into(mix, &c, &xs, &es, &mut logw, &mut bx, &mut be);
        for i in 0..d {
            fx[[r, i]] = bx[i];
            fe[[r, i]] = be[i];
        }
    }
    Ok((fx, fe))
}
