//! Sampling quality as a function of the reverse step size.

use super::score::ScoreModel;
use super::sde::sample_reverse_sde;
use super::{SampleSet, SamplerConfig};
use crate::error::{Error, Result};

/// Metrics of one step size.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub dt: f64,
    pub n_steps: usize,
    pub metrics: Vec<(String, f64)>,
}

/// Runs the Euler-Maruyama sampler at every `dt` (rounded to
/// `n = round(t_f / dt)` steps) and evaluates `hook` on each sample set.
pub fn dt_sweep(
    model: &dyn ScoreModel,
    base: &SamplerConfig,
    dts: &[f64],
    mut hook: impl FnMut(f64, &SampleSet) -> Result<Vec<(String, f64)>>,
) -> Result<Vec<SweepRow>> {
    let t_f = model.params().t_f;
    let mut rows = Vec::with_capacity(dts.len());
    for &dt in dts {
        if !(dt > 0.0) || dt > t_f {
            return Err(Error::invalid(format!("dt must lie in (0, t_f], got {dt}")));
        }
        let n_steps = (t_f / dt).round().max(1.0) as usize;
        let config = SamplerConfig { n_steps, ..base.clone() };
        let samples = sample_reverse_sde(model, &config)?;
        rows.push(SweepRow { dt, n_steps, metrics: hook(dt, &samples)? });
    }
    Ok(rows)
}
