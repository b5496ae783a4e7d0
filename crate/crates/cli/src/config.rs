//! Run configuration: one TOML file per run, validated before any work.

use std::path::PathBuf;

use active_diffusion::datasets::SwissRollVariant;
use active_diffusion::mixture::{GaussianMixture, MixtureComponent};
use active_diffusion::net::{config_hash, NetConfig, TrainConfig};
use active_diffusion::samplers::SamplerConfig;
use active_diffusion::DiffusionParams;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "RunConfig::default_out")]
    pub out: PathBuf,
    pub process: DiffusionParams,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub net: NetConfig,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub checkpoint: CheckpointSpec,
    #[serde(default)]
    pub sampler: Option<SamplerConfig>,
    #[serde(default)]
    pub metrics: MetricSpec,
    #[serde(default)]
    pub theory: Option<TheorySpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Nine-peak diamond of Gaussians.
    Diamond {
        r: f64,
        sigma: f64,
        #[serde(default = "default_n_samples")]
        n_samples: usize,
    },
    /// Arbitrary Gaussian mixture.
    Mixture {
        components: Vec<MixtureComponent>,
        #[serde(default = "default_n_samples")]
        n_samples: usize,
    },
    SwissRoll {
        variant: SwissRollVariant,
        #[serde(default = "default_n_samples")]
        n_samples: usize,
        #[serde(default = "default_roll_noise")]
        noise: f64,
    },
    Ising {
        #[serde(default = "default_side")]
        side: usize,
        temperature: f64,
        #[serde(default = "default_ising_steps")]
        steps: u64,
        #[serde(default = "default_ising_count")]
        count: usize,
    },
    /// Two-column sample file, resolved relative to the working directory.
    Csv {
        path: PathBuf,
        #[serde(default)]
        normalize: bool,
    },
}

fn default_n_samples() -> usize {
    10_000
}
fn default_roll_noise() -> f64 {
    0.02
}
fn default_side() -> usize {
    16
}
fn default_ising_steps() -> u64 {
    200_000
}
fn default_ising_count() -> usize {
    2_000
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointSpec {
    /// Write the checkpoint every this many iterations (0: only at the end).
    #[serde(default)]
    pub every: u64,
}

/// Pass/fail thresholds for `eval`; absent thresholds are reported only.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub max_energy_distance: Option<f64>,
    pub max_convolution_gap: Option<f64>,
    pub min_mode_frequency: Option<f64>,
    pub max_unassigned_fraction: Option<f64>,
    /// Filter sizes for the convolution metric (default `1..=L/2`).
    pub l_values: Option<Vec<usize>>,
}

/// Settings of the `theory` tables. Missing temperatures fall back to the
/// process temperature.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheorySpec {
    pub t_p: Option<f64>,
    pub t_a: Option<f64>,
    pub tau: Option<f64>,
    #[serde(default = "default_modes")]
    pub modes: Vec<f64>,
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    #[serde(default)]
    pub x0: f64,
}

fn default_modes() -> Vec<f64> {
    vec![1.0, 4.0, 16.0]
}
fn default_times() -> Vec<f64> {
    vec![0.0, 0.1, 0.25, 0.5, 1.0]
}

impl RunConfig {
    fn default_out() -> PathBuf {
        PathBuf::from("out")
    }

    /// Parse TOML; errors name the offending key path.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config(e.to_string()))?;
        let cfg: RunConfig =
            serde_path_to_error::deserialize(de).map_err(|e| CliError::Config(format!("at `{}`: {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |e: active_diffusion::Error| CliError::Config(e.to_string());
        self.process.validate().map_err(cfg)?;
        self.net.validate().map_err(cfg)?;
        if let Some(t) = &self.train {
            t.validate().map_err(cfg)?;
        }
        if let Some(s) = &self.sampler {
            s.validate().map_err(cfg)?;
        }
        match &self.dataset {
            DatasetSpec::Diamond { r, sigma, .. } if !(*r > 0.0 && *sigma > 0.0) => {
                return Err(CliError::Config("dataset: r and sigma must be positive".into()))
            }
            DatasetSpec::Ising { side, temperature, .. } if *side < 2 || !(*temperature > 0.0) => {
                return Err(CliError::Config("dataset: Ising needs side >= 2 and temperature > 0".into()))
            }
            DatasetSpec::Mixture { components, .. } => {
                GaussianMixture::new(components.clone()).map_err(cfg)?;
            }
            _ => {}
        }
        Ok(())
    }

    /// Effective training configuration (seed taken from the run seed).
    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let mut c = self.train.clone().ok_or_else(|| CliError::Config("missing [train] section".into()))?;
        c.seed = self.seed;
        Ok(c)
    }

    /// Effective sampler configuration (seed derived from the run seed).
    pub fn sampler_config(&self) -> SamplerConfig {
        let mut c = self.sampler.clone().unwrap_or_else(|| SamplerConfig::euler_maruyama(500, 10_000, 0));
        c.seed = active_diffusion::rng::derive_seed(self.seed, "sample");
        c
    }

    /// Hash of everything that determines a trained network, except the
    /// iteration budget, so that a run can be extended by resuming.
    pub fn training_hash(&self) -> Result<String, CliError> {
        let mut train = self.train_config()?;
        train.iterations = 0;
        Ok(config_hash(&(&self.process, &self.dataset, &self.net, &train)))
    }

    /// Hash of the whole effective configuration.
    pub fn hash(&self) -> String {
        config_hash(self)
    }
}
