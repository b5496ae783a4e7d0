//! Stochastic-gradient training of a [`ScoreNet`].

use ndarray::{Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::score_net::{hsm_loss, HsmBatch, ScoreNet};
use crate::error::{Error, Result};
use crate::mixture::GaussianMixture;
use crate::rng;

/// Where clean training points `x_0` come from.
#[derive(Clone, Debug)]
pub enum TrainingData {
    /// Fresh draws from an analytic mixture every iteration.
    Mixture(GaussianMixture),
    /// Rows of a fixed data set, drawn uniformly with replacement.
    Samples(Array2<f64>),
}

impl TrainingData {
    pub fn dim(&self) -> usize {
        match self {
            TrainingData::Mixture(m) => m.dim(),
            TrainingData::Samples(s) => s.ncols(),
        }
    }

    /// Mean per-dimension variance, used to precondition the network.
    pub fn per_dim_variance(&self) -> f64 {
        match self {
            TrainingData::Mixture(m) => {
                let c = m.covariance();
                c.diag().sum() / m.dim() as f64
            }
            TrainingData::Samples(s) => {
                if s.nrows() < 2 {
                    return 1.0;
                }
                s.var_axis(Axis(0), 0.0).sum() / s.ncols() as f64
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let TrainingData::Samples(s) = self {
            if s.nrows() == 0 || s.ncols() == 0 {
                return Err(Error::invalid("training set is empty"));
            }
            if !s.iter().all(|v| v.is_finite()) {
                return Err(Error::invalid("training set has non-finite entries"));
            }
        }
        Ok(())
    }

    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Array2<f64> {
        match self {
            TrainingData::Mixture(m) => m.sample(n, rng),
            TrainingData::Samples(s) => {
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..s.nrows())).collect();
                s.select(Axis(0), &idx)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LrSchedule {
    Constant,
    /// Cosine decay from the base rate to `final_fraction` of it over the
    /// configured number of iterations.
    Cosine { final_fraction: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: u64,
    #[serde(default = "TrainConfig::default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "TrainConfig::default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "TrainConfig::default_schedule")]
    pub lr_schedule: LrSchedule,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default)]
    pub seed: u64,
    /// A loss-trace entry (the mean loss of the window) is recorded every
    /// this many iterations.
    #[serde(default = "TrainConfig::default_log_every")]
    pub log_every: u64,
}

impl TrainConfig {
    fn default_batch_size() -> usize {
        512
    }
    fn default_learning_rate() -> f64 {
        1e-3
    }
    fn default_schedule() -> LrSchedule {
        LrSchedule::Constant
    }
    fn default_log_every() -> u64 {
        100
    }

    pub fn new(iterations: u64, seed: u64) -> Self {
        Self {
            iterations,
            batch_size: Self::default_batch_size(),
            learning_rate: Self::default_learning_rate(),
            lr_schedule: Self::default_schedule(),
            adam: AdamConfig::default(),
            seed,
            log_every: Self::default_log_every(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if self.log_every == 0 {
            return Err(Error::invalid("log_every must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return Err(Error::invalid("Adam requires beta1, beta2 in [0, 1) and eps > 0"));
        }
        if let LrSchedule::Cosine { final_fraction } = self.lr_schedule {
            if !(0.0..=1.0).contains(&final_fraction) {
                return Err(Error::invalid("final_fraction must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Learning rate for the update that completes iteration `i + 1`.
    pub fn lr_at(&self, i: u64) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.learning_rate,
            LrSchedule::Cosine { final_fraction } => {
                let progress = (i as f64 / self.iterations.max(1) as f64).min(1.0);
                let w = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
                self.learning_rate * (final_fraction + (1.0 - final_fraction) * w)
            }
        }
    }
}

/// Training state. Iteration `i` draws all of its randomness from stream `i`
/// of the run's generator family, so a run resumed from any iteration is
/// bit-identical to an uninterrupted one.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub net: ScoreNet,
    pub optimizer: Adam,
    pub config: TrainConfig,
    /// Completed iterations.
    pub iteration: u64,
    /// `(iteration, mean loss over the preceding window)` entries.
    pub trace: Vec<(u64, f64)>,
    window_sum: f64,
    window_len: u64,
}

impl Trainer {
    pub fn new(net: ScoreNet, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let optimizer = Adam::new(config.adam, net.mlp().layers());
        Ok(Self { net, optimizer, config, iteration: 0, trace: Vec::new(), window_sum: 0.0, window_len: 0 })
    }

    /// Restores a trainer from saved parts.
    pub fn resume(net: ScoreNet, optimizer: Adam, config: TrainConfig, iteration: u64, trace: Vec<(u64, f64)>) -> Result<Self> {
        config.validate()?;
        if optimizer.m.len() != net.mlp().layers().len() || optimizer.v.len() != net.mlp().layers().len() {
            return Err(Error::invalid("optimizer state does not match the network"));
        }
        if optimizer.step != iteration {
            return Err(Error::invalid("optimizer step count does not match the iteration"));
        }
        // A window interrupted by a checkpoint restarts; the trace is only
        // ever written at window boundaries.
        Ok(Self { net, optimizer, config, iteration, trace, window_sum: 0.0, window_len: 0 })
    }

    /// Runs one iteration and returns its loss. On a non-finite loss the
    /// parameters are left untouched and an error is returned.
    pub fn step(&mut self, data: &TrainingData) -> Result<f64> {
        let seed = rng::derive_seed(self.config.seed, "train");
        let mut r = rng::stream(seed, self.iteration);
        let x0 = data.draw(self.config.batch_size, &mut r);
        let batch = HsmBatch::draw(&self.net, x0.view(), &mut r)?;
        let (loss, grads) = hsm_loss(&self.net, &batch);
        let grads_finite = grads.iter().all(|g| g.weight.iter().chain(g.bias.iter()).all(|v| v.is_finite()));
        if !loss.is_finite() || !grads_finite {
            return Err(Error::TrainingDiverged { iteration: self.iteration + 1, loss });
        }
        let lr = self.config.lr_at(self.iteration);
        self.optimizer.update(self.net.mlp_mut().layers_mut(), &grads, lr);
        self.iteration += 1;
        self.window_sum += loss;
        self.window_len += 1;
        if self.iteration.is_multiple_of(self.config.log_every) {
            self.trace.push((self.iteration, self.window_sum / self.window_len as f64));
            self.window_sum = 0.0;
            self.window_len = 0;
        }
        Ok(loss)
    }

    /// Trains until `config.iterations` iterations have completed, calling
    /// `on_step` after each one.
    pub fn run_with(&mut self, data: &TrainingData, mut on_step: impl FnMut(&Self) -> Result<()>) -> Result<()> {
        data.validate()?;
        if data.dim() != self.net.dim() {
            return Err(Error::DimensionMismatch { expected: self.net.dim(), got: data.dim() });
        }
        while self.iteration < self.config.iterations {
            self.step(data)?;
            on_step(self)?;
        }
        Ok(())
    }

    pub fn run(&mut self, data: &TrainingData) -> Result<()> {
        self.run_with(data, |_| Ok(()))
    }
}

/// Convenience wrapper: initializes a network for `data` and trains it.
pub fn train(
    params: crate::process::DiffusionParams,
    data: &TrainingData,
    net_config: super::score_net::NetConfig,
    config: TrainConfig,
) -> Result<Trainer> {
    data.validate()?;
    let mut init = rng::stream(rng::derive_seed(config.seed, "init"), 0);
    let net = ScoreNet::new(params, data.dim(), data.per_dim_variance(), net_config, &mut init)?;
    let mut trainer = Trainer::new(net, config)?;
    trainer.run(data)?;
    Ok(trainer)
}
