//! Reverse-time sample synthesis.
//!
//! Both samplers start from the stationary prior at `t = t_f` and integrate
//! toward `t = 0` in the reverse time `s = t_f - t`. Chains are processed in
//! fixed-size blocks; chain `c` draws all of its randomness from stream `c`
//! of the sampler seed, so output does not depend on the thread count.

mod flow;
mod score;
mod sde;
mod sweep;

pub use flow::{sample_probability_flow, FlowStats};
pub use score::{AnalyticScore, ScoreModel, Scores};
pub use sde::sample_reverse_sde;
pub use sweep::{dt_sweep, SweepRow};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Chains integrated together as one block.
pub const BLOCK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    EulerMaruyama,
    OdeAdaptive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    #[serde(default = "SamplerConfig::default_kind")]
    pub kind: SamplerKind,
    /// Number of Euler-Maruyama steps; `dt = t_f / n_steps`.
    #[serde(default = "SamplerConfig::default_n_steps")]
    pub n_steps: usize,
    /// Apply only the drift on the final step.
    #[serde(default)]
    pub denoise_last: bool,
    #[serde(default = "SamplerConfig::default_tol")]
    pub atol: f64,
    #[serde(default = "SamplerConfig::default_tol")]
    pub rtol: f64,
    /// The probability-flow ODE is integrated down to this fraction of `t_f`
    /// (or the score model's own lower limit, whichever is later).
    #[serde(default = "SamplerConfig::default_ode_t_end_fraction")]
    pub ode_t_end_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "SamplerConfig::default_n_samples")]
    pub n_samples: usize,
}

impl SamplerConfig {
    fn default_kind() -> SamplerKind {
        SamplerKind::EulerMaruyama
    }
    fn default_n_steps() -> usize {
        500
    }
    fn default_tol() -> f64 {
        1e-5
    }
    fn default_ode_t_end_fraction() -> f64 {
        1e-3
    }
    fn default_n_samples() -> usize {
        10_000
    }

    pub fn euler_maruyama(n_steps: usize, n_samples: usize, seed: u64) -> Self {
        Self {
            kind: SamplerKind::EulerMaruyama,
            n_steps,
            denoise_last: false,
            atol: Self::default_tol(),
            rtol: Self::default_tol(),
            ode_t_end_fraction: Self::default_ode_t_end_fraction(),
            seed,
            n_samples,
        }
    }

    pub fn ode(n_samples: usize, seed: u64) -> Self {
        Self { kind: SamplerKind::OdeAdaptive, ..Self::euler_maruyama(1, n_samples, seed) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::invalid("n_steps must be at least 1"));
        }
        if !(self.atol > 0.0) || !(self.rtol > 0.0) {
            return Err(Error::invalid("ODE tolerances must be positive"));
        }
        if !(self.ode_t_end_fraction > 0.0 && self.ode_t_end_fraction < 1.0) {
            return Err(Error::invalid("ode_t_end_fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Generated states at `t = 0`, one row per chain.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub x: Array2<f64>,
    /// Final `eta` coordinates (active process only).
    pub eta: Option<Array2<f64>>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }
}

/// Stacks per-block results in block order.
fn concat(dim: usize, active: bool, blocks: Vec<(Array2<f64>, Array2<f64>)>) -> SampleSet {
    let n: usize = blocks.iter().map(|b| b.0.nrows()).sum();
    let mut x = Array2::zeros((n, dim));
    let mut eta = Array2::zeros((n, dim));
    let mut row = 0;
    for (bx, be) in blocks {
        let m = bx.nrows();
        x.slice_mut(ndarray::s![row..row + m, ..]).assign(&bx);
        eta.slice_mut(ndarray::s![row..row + m, ..]).assign(&be);
        row += m;
    }
    SampleSet { x, eta: active.then_some(eta) }
}

fn check_finite(block: &Array2<f64>, what: &str, step: usize, t: f64, first_chain: usize) -> Result<()> {
    if let Some(pos) = block.iter().position(|v| !v.is_finite()) {
        let chain = first_chain + pos / block.ncols().max(1);
        return Err(Error::Numeric(format!(
            "non-finite {what} in chain {chain} at step {step} (t = {t:.6})"
        )));
    }
    Ok(())
}
