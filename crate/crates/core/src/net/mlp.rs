//! Fully connected network with SiLU hidden activations and hand-written
//! reverse-mode differentiation.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer widths, input first and output last.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MlpShape {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
}

impl MlpShape {
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input);
        w.extend(&self.hidden);
        w.push(self.output);
        w
    }

    pub fn parameter_count(&self) -> usize {
        self.widths().windows(2).map(|p| p[0] * p[1] + p[1]).sum()
    }
}

/// One affine layer `y = x W + b`, with `W` stored as `(fan_in, fan_out)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self { weight: Array2::zeros((fan_in, fan_out)), bias: Array1::zeros(fan_out) }
    }

    fn uniform<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut draw = || rng.random_range(-bound..bound);
        let weight = Array2::from_shape_simple_fn((fan_in, fan_out), &mut draw);
        let bias = Array1::from_shape_simple_fn(fan_out, &mut draw);
        Self { weight, bias }
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[inline]
fn silu(z: f64) -> f64 {
    z * sigmoid(z)
}

#[inline]
fn silu_grad(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 + z * (1.0 - s))
}

/// Multi-layer perceptron.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    shape: MlpShape,
    layers: Vec<Linear>,
}

/// Pre-activations and activations kept for the backward pass.
pub struct ForwardCache {
    /// Layer inputs: the network input followed by every hidden activation.
    inputs: Vec<Array2<f64>>,
    /// Hidden pre-activations.
    pre: Vec<Array2<f64>>,
}

impl Mlp {
    /// Fan-in scaled uniform initialization with a zero output layer.
    pub fn new<R: Rng + ?Sized>(shape: MlpShape, rng: &mut R) -> Result<Self> {
        let widths = shape.widths();
        if widths.contains(&0) {
            return Err(Error::invalid("network layer widths must be positive"));
        }
        let n = widths.len() - 1;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, p)| if i + 1 == n { Linear::zeros(p[0], p[1]) } else { Linear::uniform(p[0], p[1], rng) })
            .collect();
        Ok(Self { shape, layers })
    }

    /// Rebuilds a network from explicit layers, checking them against `shape`.
    pub fn from_layers(shape: MlpShape, layers: Vec<Linear>) -> Result<Self> {
        let widths = shape.widths();
        if layers.len() + 1 != widths.len() {
            return Err(Error::invalid(format!(
                "expected {} layers, got {}",
                widths.len() - 1,
                layers.len()
            )));
        }
        for (i, (l, p)) in layers.iter().zip(widths.windows(2)).enumerate() {
            if l.weight.dim() != (p[0], p[1]) || l.bias.len() != p[1] {
                return Err(Error::invalid(format!("layer {i} does not match the declared shape")));
            }
            if !l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()) {
                return Err(Error::invalid(format!("layer {i} has non-finite parameters")));
            }
        }
        Ok(Self { shape, layers })
    }

    pub fn shape(&self) -> &MlpShape {
        &self.shape
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Linear] {
        &mut self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.shape.parameter_count()
    }

    /// Batched forward pass on rows of `x`.
    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut h = x.to_owned();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = h.dot(&l.weight);
            z += &l.bias;
            if i < last {
                z.mapv_inplace(silu);
            }
            h = z;
        }
        h
    }

    /// Forward pass that records what [`Mlp::backward`] needs.
    pub fn forward_cached(&self, x: ArrayView2<f64>) -> (Array2<f64>, ForwardCache) {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        inputs.push(x.to_owned());
        let mut out = None;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = inputs[i].dot(&l.weight);
            z += &l.bias;
            if i < last {
                inputs.push(z.mapv(silu));
                pre.push(z);
            } else {
                out = Some(z);
            }
        }
        (out.expect("at least one layer"), ForwardCache { inputs, pre })
    }

    /// Gradients of `sum(grad_out ⊙ output)` with respect to every layer.
    pub fn backward(&self, cache: &ForwardCache, grad_out: Array2<f64>) -> Vec<Linear> {
        let mut grads: Vec<Linear> = Vec::with_capacity(self.layers.len());
        let mut delta = grad_out;
        for i in (0..self.layers.len()).rev() {
            let l = &self.layers[i];
            let weight = cache.inputs[i].t().dot(&delta);
            let bias = delta.sum_axis(Axis(0));
            grads.push(Linear { weight, bias });
            if i > 0 {
                let mut upstream = delta.dot(&l.weight.t());
                Zip::from(&mut upstream)
                    .and(&cache.pre[i - 1])
                    .for_each(|g, &z| *g *= silu_grad(z));
                delta = upstream;
            }
        }
        grads.reverse();
        grads
    }
}
