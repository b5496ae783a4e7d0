//! Adaptive integration of the probability-flow ODE.
//!
//! The flow shares the time marginals of the reverse SDE; it replaces the
//! noise by half of the score term:
//!
//! ```text
//! dx/ds   = k x - eta + T_p F_x
//! deta/ds = eta / tau + (T_a / tau^2) F_eta
//! ```
//!
//! (passive: `dx/ds = k x + T F_x`). Each block of chains is one ODE system
//! advanced by the Dormand-Prince 5(4) pair with a PI step-size controller.

use ndarray::{concatenate, s, Array2, Axis};
use rayon::prelude::*;

use super::score::ScoreModel;
use super::{check_finite, concat, SampleSet, SamplerConfig, BLOCK};
use crate::error::{Error, Result};
use crate::process::{prior_sample, reverse_drift_batch};
use crate::rng;

/// Integration effort summed over blocks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FlowStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const SAFETY: f64 = 0.9;
const MIN_STEP: f64 = 1e-8;
const MAX_GROWTH: f64 = 10.0;
const MIN_SHRINK: f64 = 0.2;
// PI controller exponents for a method of order 5 (Hairer & Wanner).
const ALPHA: f64 = 0.7 / 5.0;
const BETA: f64 = 0.4 / 5.0;
const MAX_STEPS: usize = 1_000_000;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Flow right-hand side on the stacked state `[x | eta]` at reverse time `s`.
struct Rhs<'a> {
    model: &'a dyn ScoreModel,
    d: usize,
    evaluations: usize,
}

impl Rhs<'_> {
    fn split(&self, y: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let x = y.slice(s![.., ..self.d]).to_owned();
        let eta = if self.model.params().is_active() {
            y.slice(s![.., self.d..]).to_owned()
        } else {
            Array2::zeros(x.raw_dim())
        };
        (x, eta)
    }

    /// Reverse drift at time `t` with the score terms scaled by `score_scale`
    /// (1/2 for the flow, 1 for the SDE drift).
    fn drift(&mut self, y: &Array2<f64>, t: f64, score_scale: f64) -> Result<Array2<f64>> {
        self.evaluations += 1;
        let params = *self.model.params();
        let (x, eta) = self.split(y);
        let t = t.max(self.model.t_min());
        let mut sc = self.model.scores(x.view(), eta.view(), t)?;
        for v in [sc.x.as_mut(), sc.eta.as_mut()].into_iter().flatten() {
            *v *= score_scale;
        }
        let (dx, deta) = reverse_drift_batch(
            &params,
            x.view(),
            eta.view(),
            sc.x.as_ref().map(|v| v.view()),
            sc.eta.as_ref().map(|v| v.view()),
        );
        Ok(if params.is_active() { concatenate![Axis(1), dx, deta] } else { dx })
    }
}

/// Draws samples by integrating the probability-flow ODE from `t_f` to
/// `t_end = max(ode_t_end_fraction t_f, model.t_min())`. With
/// `denoise_last` a final drift-only SDE step of size `t_end` brings the
/// state to `t = 0`.
pub fn sample_probability_flow(model: &dyn ScoreModel, config: &SamplerConfig) -> Result<(SampleSet, FlowStats)> {
    config.validate()?;
    let params = *model.params();
    params.validate()?;
    let d = model.dim();
    let n = config.n_samples;
    let starts: Vec<usize> = (0..n).step_by(BLOCK).collect();
    let results = starts
        .par_iter()
        .map(|&start| {
            let m = BLOCK.min(n - start);
            let mut x = Array2::zeros((m, d));
            let mut eta = Array2::zeros((m, d));
            for r in 0..m {
                let st = prior_sample(&params, d, &mut rng::stream(config.seed, (start + r) as u64))?;
                for i in 0..d {
                    x[[r, i]] = st.x[i];
                    eta[[r, i]] = st.eta[i];
                }
            }
            integrate_block(model, config, x, eta, start)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut stats = FlowStats::default();
    let mut blocks = Vec::with_capacity(results.len());
    for (b, st) in results {
        stats.accepted += st.accepted;
        stats.rejected += st.rejected;
        stats.evaluations += st.evaluations;
        blocks.push(b);
    }
    Ok((concat(d, params.is_active(), blocks), stats))
}

/// Final `(x, eta)` of one block of chains.
type Block = (Array2<f64>, Array2<f64>);

/// Integrates one block from its prior draws `(x, eta)` at `t_f`.
pub(crate) fn integrate_block(
    model: &dyn ScoreModel,
    config: &SamplerConfig,
    x: Array2<f64>,
    eta: Array2<f64>,
    first_chain: usize,
) -> Result<(Block, FlowStats)> {
    let params = *model.params();
    let d = model.dim();
    let t_f = params.t_f;
    let t_end = (config.ode_t_end_fraction * t_f).max(model.t_min());
    let s_end = t_f - t_end;
    let mut rhs = Rhs { model, d, evaluations: 0 };
    let mut y = if params.is_active() { concatenate![Axis(1), x, eta] } else { x };
    let mut stats = FlowStats::default();
    if y.nrows() == 0 {
        return Ok((rhs.split(&y), stats));
    }

    let mut s_now = 0.0;
    let mut h = (t_f / 100.0).min(s_end);
    let mut err_prev: f64 = 1e-4;
    let mut k1 = rhs.drift(&y, t_f, 0.5)?;
    let mut k: Vec<Array2<f64>> = Vec::with_capacity(7);
    while s_now < s_end {
        if stats.accepted + stats.rejected >= MAX_STEPS {
            return Err(Error::Numeric("probability-flow integration exceeded the step budget".into()));
        }
        let last = s_now + h >= s_end * (1.0 - 1e-12);
        if last {
            h = s_end - s_now;
        }
        k.clear();
        k.push(k1.clone());
        // The last row of A holds the fifth-order weights, so the final
        // stage state is the proposed solution and its slope is reused as
        // the first stage of the next step.
        let mut y5 = y.clone();
        for stage in 1..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[stage][j] != 0.0 {
                    ys.scaled_add(h * A[stage][j], kj);
                }
            }
            k.push(rhs.drift(&ys, t_f - (s_now + C[stage] * h), 0.5)?);
            if stage == 6 {
                y5 = ys;
            }
        }
        let mut e = Array2::<f64>::zeros(y.raw_dim());
        for (j, kj) in k.iter().enumerate() {
            if E[j] != 0.0 {
                e.scaled_add(h * E[j], kj);
            }
        }
        let mut err_acc = 0.0;
        ndarray::Zip::from(&e).and(&y).and(&y5).for_each(|&ei, &y0, &y1| {
            let q = ei / (config.atol + config.rtol * y0.abs().max(y1.abs()));
            err_acc += q * q;
        });
        let err = (err_acc / y.len() as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::Numeric(format!("non-finite error estimate at t = {:.6}", t_f - s_now)));
        }
        if err <= 1.0 {
            stats.accepted += 1;
            s_now = if last { s_end } else { s_now + h };
            y = y5;
            k1 = k.pop().expect("seven stages");
            check_finite(&y, "state", stats.accepted, t_f - s_now, first_chain)?;
            let factor = SAFETY * err.max(1e-10).powf(-ALPHA) * err_prev.powf(BETA);
            err_prev = err.max(1e-4);
            h *= factor.clamp(MIN_SHRINK, MAX_GROWTH);
        } else {
            stats.rejected += 1;
            h *= (SAFETY * err.powf(-1.0 / 5.0)).max(MIN_SHRINK);
        }
        if s_now < s_end && h < MIN_STEP {
            return Err(Error::Numeric(format!("step size underflow ({h:.3e}) at t = {:.6}", t_f - s_now)));
        }
    }
    if config.denoise_last {
        let drift = rhs.drift(&y, t_end, 1.0)?;
        y.scaled_add(t_end, &drift);
        check_finite(&y, "state", stats.accepted + 1, 0.0, first_chain)?;
    }
    stats.evaluations = rhs.evaluations;
    Ok((rhs.split(&y), stats))
}
