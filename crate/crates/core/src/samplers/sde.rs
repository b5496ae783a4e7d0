//! Fixed-step Euler-Maruyama integration of the reverse SDE.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::score::ScoreModel;
use super::{check_finite, concat, SampleSet, SamplerConfig, BLOCK};
use crate::error::Result;
use crate::process::{prior_sample, reverse_drift_batch};
use crate::rng::{self, StreamRng};

/// Draws `config.n_samples` samples with `config.n_steps` steps of size
/// `dt = t_f / n_steps`. Step `i` evaluates the scores at
/// `t = max(t_f - i dt, model.t_min())`, so the last evaluation is at
/// `t = dt` and the state is returned at `t = 0`.
pub fn sample_reverse_sde(model: &dyn ScoreModel, config: &SamplerConfig) -> Result<SampleSet> {
    config.validate()?;
    let params = *model.params();
    params.validate()?;
    let d = model.dim();
    let n = config.n_samples;
    let starts: Vec<usize> = (0..n).step_by(BLOCK).collect();
    let blocks = starts
        .par_iter()
        .map(|&start| run_block(model, config, start, BLOCK.min(n - start), d))
        .collect::<Result<Vec<_>>>()?;
    Ok(concat(d, params.is_active(), blocks))
}

fn run_block(
    model: &dyn ScoreModel,
    config: &SamplerConfig,
    start: usize,
    m: usize,
    d: usize,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let params = *model.params();
    let mut rngs: Vec<StreamRng> = (start..start + m).map(|c| rng::stream(config.seed, c as u64)).collect();
    let mut x = Array2::zeros((m, d));
    let mut eta = Array2::zeros((m, d));
    for (r, g) in rngs.iter_mut().enumerate() {
        let s = prior_sample(&params, d, g)?;
        for i in 0..d {
            x[[r, i]] = s.x[i];
            eta[[r, i]] = s.eta[i];
        }
    }
    let n_steps = config.n_steps;
    let dt = params.t_f / n_steps as f64;
    let (sx, se) = (params.x_noise() * dt.sqrt(), params.eta_noise() * dt.sqrt());
    for step in 0..n_steps {
        let t = (params.t_f - step as f64 * dt).max(model.t_min());
        let scores = model.scores(x.view(), eta.view(), t)?;
        let (dx, deta) = reverse_drift_batch(
            &params,
            x.view(),
            eta.view(),
            scores.x.as_ref().map(|s| s.view()),
            scores.eta.as_ref().map(|s| s.view()),
        );
        x.scaled_add(dt, &dx);
        eta.scaled_add(dt, &deta);
        let noisy = !(config.denoise_last && step + 1 == n_steps);
        if noisy && (sx > 0.0 || se > 0.0) {
            for (r, g) in rngs.iter_mut().enumerate() {
                for i in 0..d {
                    if sx > 0.0 {
                        x[[r, i]] += sx * g.sample::<f64, _>(StandardNormal);
                    }
                    if se > 0.0 {
                        eta[[r, i]] += se * g.sample::<f64, _>(StandardNormal);
                    }
                }
            }
        }
        check_finite(&x, "x", step, t, start)?;
        check_finite(&eta, "eta", step, t, start)?;
    }
    Ok((x, eta))
}
