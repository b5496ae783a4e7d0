//! Versioned checkpoint files.
//!
//! A checkpoint is a JSON document holding the process constants, the
//! network configuration, the training configuration and progress, and
//! every parameter tensor (network and optimizer moments) by name with its
//! shape. Floats are written in shortest round-trip form, so a save/load
//! cycle is bit-exact.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::adam::Adam;
use super::mlp::Linear;
use super::score_net::{NetConfig, ScoreNet};
use super::train::{TrainConfig, Trainer};
use crate::error::{Error, Result};
use crate::process::DiffusionParams;

pub const CHECKPOINT_FORMAT: &str = "active-diffusion-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
const DTYPE: &str = "f64";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub dtype: String,
    /// Hash of the run configuration that produced the checkpoint.
    pub config_hash: String,
    pub process: DiffusionParams,
    pub dim: usize,
    pub data_variance: f64,
    pub net: NetConfig,
    pub train: TrainConfig,
    pub iteration: u64,
    pub trace: Vec<(u64, f64)>,
    pub tensors: Vec<Tensor>,
}

/// SHA-256 (hex) of the canonical JSON encoding of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("configuration serializes");
    let bytes = serde_json::to_vec(&v).expect("json value serializes");
    hex::encode(Sha256::digest(&bytes))
}

fn push_layers(out: &mut Vec<Tensor>, prefix: &str, layers: &[Linear]) {
    for (i, l) in layers.iter().enumerate() {
        out.push(Tensor {
            name: format!("{prefix}.{i}.weight"),
            shape: vec![l.weight.nrows(), l.weight.ncols()],
            data: l.weight.iter().copied().collect(),
        });
        out.push(Tensor { name: format!("{prefix}.{i}.bias"), shape: vec![l.bias.len()], data: l.bias.to_vec() });
    }
}

impl Checkpoint {
    pub fn from_trainer(trainer: &Trainer, config_hash: String) -> Self {
        let net = &trainer.net;
        let mut tensors = Vec::new();
        push_layers(&mut tensors, "layers", net.mlp().layers());
        push_layers(&mut tensors, "adam.m", &trainer.optimizer.m);
        push_layers(&mut tensors, "adam.v", &trainer.optimizer.v);
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            dtype: DTYPE.to_string(),
            config_hash,
            process: *net.params(),
            dim: net.dim(),
            data_variance: net.data_variance(),
            net: net.config().clone(),
            train: trainer.config.clone(),
            iteration: trainer.iteration,
            trace: trainer.trace.clone(),
            tensors,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    /// Parses and fully validates a checkpoint document.
    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("not a checkpoint (format {:?})", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        if ck.dtype != DTYPE {
            return Err(Error::Checkpoint(format!("unsupported dtype {:?}", ck.dtype)));
        }
        // Rebuilding the trainer checks every tensor.
        ck.trainer()?;
        Ok(ck)
    }

    fn layers(&self, prefix: &str, shapes: &[(usize, usize)]) -> Result<Vec<Linear>> {
        let find = |name: String| {
            self.tensors
                .iter()
                .find(|t| t.name == name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))
        };
        let mut out = Vec::with_capacity(shapes.len());
        for (i, &(fan_in, fan_out)) in shapes.iter().enumerate() {
            let w = find(format!("{prefix}.{i}.weight"))?;
            let b = find(format!("{prefix}.{i}.bias"))?;
            if w.shape != [fan_in, fan_out] || w.data.len() != fan_in * fan_out {
                return Err(Error::Checkpoint(format!("tensor {} has the wrong shape", w.name)));
            }
            if b.shape != [fan_out] || b.data.len() != fan_out {
                return Err(Error::Checkpoint(format!("tensor {} has the wrong shape", b.name)));
            }
            let weight = Array2::from_shape_vec((fan_in, fan_out), w.data.clone()).expect("checked length");
            out.push(Linear { weight, bias: Array1::from(b.data.clone()) });
        }
        Ok(out)
    }

    /// The stored network.
    pub fn net(&self) -> Result<ScoreNet> {
        let mut shapes = Vec::new();
        // Shapes follow from the configuration; ScoreNet::from_parts checks
        // them again together with finiteness.
        let channels = if self.process.is_active() { 2 * self.dim } else { self.dim };
        let mut widths = vec![channels.checked_add(self.net.time_features).ok_or_else(|| Error::Checkpoint("dimension overflow".into()))?];
        widths.extend(&self.net.hidden);
        widths.push(self.dim);
        for p in widths.windows(2) {
            p[0].checked_mul(p[1]).ok_or_else(|| Error::Checkpoint("layer size overflow".into()))?;
            shapes.push((p[0], p[1]));
        }
        let layers = self.layers("layers", &shapes)?;
        ScoreNet::from_parts(self.process, self.dim, self.data_variance, self.net.clone(), layers)
            .map_err(|e| Error::Checkpoint(e.to_string()))
    }

    /// The stored training state, ready to continue.
    pub fn trainer(&self) -> Result<Trainer> {
        let net = self.net()?;
        let shapes: Vec<(usize, usize)> = net.mlp().layers().iter().map(|l| l.weight.dim()).collect();
        let m = self.layers("adam.m", &shapes)?;
        let v = self.layers("adam.v", &shapes)?;
        let finite = m.iter().chain(&v).all(|l| l.weight.iter().chain(l.bias.iter()).all(|x| x.is_finite()));
        if !finite {
            return Err(Error::Checkpoint("optimizer state has non-finite entries".into()));
        }
        if !self.trace.iter().all(|(_, l)| l.is_finite()) {
            return Err(Error::Checkpoint("loss trace has non-finite entries".into()));
        }
        let optimizer = Adam { config: self.train.adam, step: self.iteration, m, v };
        Trainer::resume(net, optimizer, self.train.clone(), self.iteration, self.trace.clone())
            .map_err(|e| Error::Checkpoint(e.to_string()))
    }
}
