//! Sources of score functions for the reverse dynamics.

use ndarray::{Array2, ArrayView2};

use crate::error::Result;
use crate::mixture::GaussianMixture;
use crate::net::ScoreNet;
use crate::process::DiffusionParams;
use crate::scores::{active_score_batch, passive_score_batch};

/// Scores at a batch of states. `x` is present when the `x`-score enters
/// the reverse dynamics, `eta` for the active process.
#[derive(Clone, Debug, Default)]
pub struct Scores {
    pub x: Option<Array2<f64>>,
    pub eta: Option<Array2<f64>>,
}

/// Anything that can evaluate scores of the forward marginals.
pub trait ScoreModel: Sync {
    fn params(&self) -> &DiffusionParams;
    fn dim(&self) -> usize;
    /// Earliest time at which the scores may be evaluated.
    fn t_min(&self) -> f64 {
        0.0
    }
    /// Scores of rows `(x, eta)` at the common time `t`.
    fn scores(&self, x: ArrayView2<f64>, eta: ArrayView2<f64>, t: f64) -> Result<Scores>;
}

/// Exact scores of a Gaussian-mixture target.
#[derive(Clone, Debug)]
pub struct AnalyticScore {
    pub mixture: GaussianMixture,
    pub params: DiffusionParams,
}

impl AnalyticScore {
    pub fn new(mixture: GaussianMixture, params: DiffusionParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { mixture, params })
    }
}

impl ScoreModel for AnalyticScore {
    fn params(&self) -> &DiffusionParams {
        &self.params
    }

    fn dim(&self) -> usize {
        self.mixture.dim()
    }

    fn scores(&self, x: ArrayView2<f64>, eta: ArrayView2<f64>, t: f64) -> Result<Scores> {
        if self.params.is_active() {
            let (fx, fe) = active_score_batch(&self.mixture, x, eta, t, &self.params)?;
            Ok(Scores { x: self.params.needs_x_score().then_some(fx), eta: Some(fe) })
        } else {
            Ok(Scores { x: Some(passive_score_batch(&self.mixture, x, t, &self.params)?), eta: None })
        }
    }
}

impl ScoreModel for ScoreNet {
    fn params(&self) -> &DiffusionParams {
        ScoreNet::params(self)
    }

    fn dim(&self) -> usize {
        ScoreNet::dim(self)
    }

    fn t_min(&self) -> f64 {
        ScoreNet::t_min(self)
    }

    fn scores(&self, x: ArrayView2<f64>, eta: ArrayView2<f64>, t: f64) -> Result<Scores> {
        if ScoreNet::params(self).is_active() {
            Ok(Scores { x: None, eta: Some(self.mixed_score(x, Some(eta), t)?) })
        } else {
            Ok(Scores { x: Some(self.mixed_score(x, None, t)?), eta: None })
        }
    }
}
