//! Learned score with the mixed parameterization.
//!
//! The network learns only the part of the score that the Gaussian
//! reference does not already explain. For the active process the learned
//! quantity is the `eta`-score,
//!
//! ```text
//! S(x, eta, t) = -eta / m22 + c_out(t) N(c_x x, c_eta eta, t)
//! ```
//!
//! where `m22 = T_a / tau` is the variance of `eta` given `x_0` (with
//! `eta_0` marginalized it does not depend on `t`). For the passive process
//! the reference is the score of a Gaussian with the data's per-dimension
//! variance `s^2` pushed forward, `-x / (Delta + a^2 s^2)`.
//!
//! `c_out` is the inverse standard deviation of the hybrid score-matching
//! target noise: the conditional standard deviation of `eta` given `x` under
//! the `x_0`-conditioned kernel (active), or `sqrt(Delta)` (passive). With
//! this scaling the network output is `O(1)` at every time.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::embedding::time_features_into;
use super::mlp::{Linear, Mlp, MlpShape};
use crate::error::{ensure_dim, Error, Result};
use crate::process::{marginal_at, moments_at, DiffusionParams};

/// Architecture and time-range settings of a score network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    #[serde(default = "NetConfig::default_hidden")]
    pub hidden: Vec<usize>,
    /// Number of sinusoidal time features; must be even.
    #[serde(default = "NetConfig::default_time_features")]
    pub time_features: usize,
    /// The network is trained and evaluated for `t >= t_min_fraction * t_f`.
    #[serde(default = "NetConfig::default_t_min_fraction")]
    pub t_min_fraction: f64,
}

impl NetConfig {
    fn default_hidden() -> Vec<usize> {
        vec![128; 4]
    }
    fn default_time_features() -> usize {
        16
    }
    fn default_t_min_fraction() -> f64 {
        1e-3
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be positive"));
        }
        if self.time_features == 0 || !self.time_features.is_multiple_of(2) {
            return Err(Error::invalid("time_features must be a positive even number"));
        }
        if !(self.t_min_fraction > 0.0 && self.t_min_fraction < 1.0) {
            return Err(Error::invalid("t_min_fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            hidden: Self::default_hidden(),
            time_features: Self::default_time_features(),
            t_min_fraction: Self::default_t_min_fraction(),
        }
    }
}

/// Time-dependent coefficients of the parameterization and of the
/// `x_0`-conditioned kernel used to draw training states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Precond {
    /// Mean coefficient `e^{-kt}` of `x_0`.
    pub a: f64,
    /// Input scale for `x`.
    pub in_x: f64,
    /// Input scale for `eta` (zero for the passive process).
    pub in_eta: f64,
    /// Coefficient of the analytic reference score (times `eta` or `x`).
    pub offset: f64,
    /// Standard deviation of the score-matching target noise; `c_out` is its
    /// inverse.
    pub noise_scale: f64,
    /// Cholesky factor `(l11, l21, l22)` of the per-dimension kernel
    /// covariance. For the passive process only `l11` is used.
    pub chol: (f64, f64, f64),
}

impl Precond {
    pub fn new(params: &DiffusionParams, data_variance: f64, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidTime { t, reason: "the learned score needs t > 0" });
        }
        if params.is_active() {
            let m = marginal_at(params, t);
            if !(m.m22 > 0.0) {
                return Err(Error::InvalidTime { t, reason: "m22 must be positive" });
            }
            // det of the marginal covariance C + g v v^T, v = (bcoef, b),
            // expanded so that no leading terms cancel at small t.
            let c = moments_at(params, t);
            let g = params.eta_variance();
            let det = c.det() + g * (c.bcoef * c.bcoef * c.m22 - 2.0 * c.bcoef * c.b * c.m12 + c.b * c.b * c.m11);
            let l11 = m.m11.sqrt();
            let l21 = m.m12 / l11;
            let l22 = (det / m.m11).sqrt();
            if !(l22 > 0.0) || !l22.is_finite() {
                return Err(Error::Numeric(format!("degenerate score-matching kernel at t = {t}")));
            }
            Ok(Self {
                a: m.a,
                in_x: 1.0 / (m.m11 + m.a * m.a * data_variance).sqrt(),
                in_eta: 1.0 / m.m22.sqrt(),
                offset: -1.0 / m.m22,
                noise_scale: l22,
                chol: (l11, l21, l22),
            })
        } else {
            let m = moments_at(params, t);
            let delta = m.m11;
            if !(delta > 0.0) {
                return Err(Error::InvalidTime { t, reason: "Delta_t must be positive" });
            }
            let total = delta + m.a * m.a * data_variance;
            Ok(Self {
                a: m.a,
                in_x: 1.0 / total.sqrt(),
                in_eta: 0.0,
                offset: -1.0 / total,
                noise_scale: delta.sqrt(),
                chol: (delta.sqrt(), 0.0, 0.0),
            })
        }
    }

    pub fn c_out(&self) -> f64 {
        1.0 / self.noise_scale
    }
}

/// A trainable score approximator for one process and data dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreNet {
    params: DiffusionParams,
    dim: usize,
    data_variance: f64,
    config: NetConfig,
    mlp: Mlp,
}

impl ScoreNet {
    /// Freshly initialized network. `data_variance` is the mean
    /// per-dimension variance of the training data.
    pub fn new<R: Rng + ?Sized>(
        params: DiffusionParams,
        dim: usize,
        data_variance: f64,
        config: NetConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let shape = Self::check(&params, dim, data_variance, &config)?;
        let mlp = Mlp::new(shape, rng)?;
        Ok(Self { params, dim, data_variance, config, mlp })
    }

    /// Reassembles a network from stored layers.
    pub fn from_parts(
        params: DiffusionParams,
        dim: usize,
        data_variance: f64,
        config: NetConfig,
        layers: Vec<Linear>,
    ) -> Result<Self> {
        let shape = Self::check(&params, dim, data_variance, &config)?;
        let mlp = Mlp::from_layers(shape, layers)?;
        Ok(Self { params, dim, data_variance, config, mlp })
    }

    fn check(params: &DiffusionParams, dim: usize, data_variance: f64, config: &NetConfig) -> Result<MlpShape> {
        params.validate()?;
        config.validate()?;
        if dim == 0 {
            return Err(Error::invalid("data dimension must be positive"));
        }
        if !(data_variance > 0.0) || !data_variance.is_finite() {
            return Err(Error::invalid("data variance must be positive and finite"));
        }
        if params.is_active() && params.t_p > 0.0 {
            return Err(Error::invalid("learned active scores require T_p = 0 (only the eta-score is learned)"));
        }
        if params.is_active() && !(params.t_a > 0.0) {
            return Err(Error::invalid("learned active scores require T_a > 0"));
        }
        if !params.is_active() && !(params.t_p > 0.0) {
            return Err(Error::invalid("learned passive scores require T > 0"));
        }
        let channels = if params.is_active() { 2 * dim } else { dim };
        Ok(MlpShape { input: channels + config.time_features, hidden: config.hidden.clone(), output: dim })
    }

    pub fn params(&self) -> &DiffusionParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data_variance(&self) -> f64 {
        self.data_variance
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    /// Earliest time at which the network is trained and evaluated.
    pub fn t_min(&self) -> f64 {
        self.config.t_min_fraction * self.params.t_f
    }

    pub fn precond(&self, t: f64) -> Result<Precond> {
        Precond::new(&self.params, self.data_variance, t)
    }

    /// Writes the network input for one state.
    fn input_row(&self, p: &Precond, x: &[f64], eta: &[f64], t: f64, out: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            out[i] = p.in_x * x[i];
        }
        let feats = if self.params.is_active() {
            for i in 0..d {
                out[d + i] = p.in_eta * eta[i];
            }
            &mut out[2 * d..]
        } else {
            &mut out[d..]
        };
        time_features_into(t, self.params.t_f, feats);
    }

    fn check_batch(&self, x: &ArrayView2<f64>, eta: Option<&ArrayView2<f64>>) -> Result<()> {
        ensure_dim(self.dim, x.ncols())?;
        if self.params.is_active() {
            let eta = eta.ok_or_else(|| Error::invalid("the active score needs eta"))?;
            ensure_dim(self.dim, eta.ncols())?;
            ensure_dim(x.nrows(), eta.nrows())?;
        }
        Ok(())
    }

    /// Network input matrix for states at per-row times.
    fn inputs(&self, x: &ArrayView2<f64>, eta: Option<&ArrayView2<f64>>, pre: &[Precond], t: &[f64]) -> Array2<f64> {
        let n = x.nrows();
        let mut input = Array2::zeros((n, self.mlp.shape().input));
        let mut xs = vec![0.0; self.dim];
        let mut es = vec![0.0; self.dim];
        for r in 0..n {
            for i in 0..self.dim {
                xs[i] = x[[r, i]];
                if let Some(e) = eta {
                    es[i] = e[[r, i]];
                }
            }
            let row = input.row_mut(r).into_slice().expect("standard layout");
            self.input_row(&pre[r], &xs, &es, t[r], row);
        }
        input
    }

    /// Learned residual `c_out(t) N(...)` at a common time `t`.
    pub fn raw_output(&self, x: ArrayView2<f64>, eta: Option<ArrayView2<f64>>, t: f64) -> Result<Array2<f64>> {
        self.check_batch(&x, eta.as_ref())?;
        let p = self.precond(t)?;
        let n = x.nrows();
        let input = self.inputs(&x, eta.as_ref(), &vec![p; n], &vec![t; n]);
        let mut out = self.mlp.forward(input.view());
        out *= p.c_out();
        Ok(out)
    }

    /// Full score estimate: analytic reference plus learned residual. This is
    /// the `eta`-score for the active process and the `x`-score for the
    /// passive one.
    pub fn mixed_score(&self, x: ArrayView2<f64>, eta: Option<ArrayView2<f64>>, t: f64) -> Result<Array2<f64>> {
        let mut s = self.raw_output(x, eta, t)?;
        let p = self.precond(t)?;
        let reference = if self.params.is_active() { eta.expect("checked") } else { x };
        s.zip_mut_with(&reference, |s, &v| *s += p.offset * v);
        Ok(s)
    }
}

/// A fixed set of noisy training states with their score-matching targets.
#[derive(Clone, Debug)]
pub struct HsmBatch {
    pub x: Array2<f64>,
    /// `eta` coordinates; `None` for the passive process.
    pub eta: Option<Array2<f64>>,
    pub t: Vec<f64>,
    /// Standard normal noise of the scored channel. The conditional score
    /// target is `-noise / noise_scale`.
    pub noise: Array2<f64>,
    pub precond: Vec<Precond>,
}

impl HsmBatch {
    /// Draws times `t ~ U[t_min, t_f]` and states from the kernel
    /// conditioned on the rows of `x0`.
    pub fn draw<R: Rng + ?Sized>(net: &ScoreNet, x0: ArrayView2<f64>, rng: &mut R) -> Result<Self> {
        ensure_dim(net.dim, x0.ncols())?;
        let (n, d) = x0.dim();
        let active = net.params.is_active();
        let (t_lo, t_hi) = (net.t_min(), net.params.t_f);
        let mut x = Array2::zeros((n, d));
        let mut eta = active.then(|| Array2::zeros((n, d)));
        let mut noise = Array2::zeros((n, d));
        let mut t = Vec::with_capacity(n);
        let mut precond = Vec::with_capacity(n);
        for r in 0..n {
            let tr = rng.random_range(t_lo..=t_hi);
            let p = net.precond(tr)?;
            let (l11, l21, l22) = p.chol;
            for i in 0..d {
                let z1: f64 = rng.sample(StandardNormal);
                let mean = p.a * x0[[r, i]];
                match eta.as_mut() {
                    Some(e) => {
                        let z2: f64 = rng.sample(StandardNormal);
                        x[[r, i]] = mean + l11 * z1;
                        e[[r, i]] = l21 * z1 + l22 * z2;
                        noise[[r, i]] = z2;
                    }
                    None => {
                        x[[r, i]] = mean + l11 * z1;
                        noise[[r, i]] = z1;
                    }
                }
            }
            t.push(tr);
            precond.push(p);
        }
        Ok(Self { x, eta, t, noise, precond })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Conditional score targets `-noise / noise_scale`.
    pub fn targets(&self) -> Array2<f64> {
        let mut out = self.noise.clone();
        for (mut row, p) in out.rows_mut().into_iter().zip(&self.precond) {
            row.mapv_inplace(|z| -z / p.noise_scale);
        }
        out
    }

    /// Loss for an arbitrary raw network output `n` (before `c_out`
    /// scaling), e.g. an oracle.
    pub fn loss_for_output(&self, n: &Array2<f64>) -> f64 {
        let r = self.residual(n);
        r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64
    }

    /// Weighted residual `noise_scale (S - target)` given the raw network
    /// output `n` (before `c_out` scaling).
    fn residual(&self, n: &Array2<f64>) -> Array2<f64> {
        let reference = self.eta.as_ref().unwrap_or(&self.x);
        let mut r = n.clone();
        for (row, p) in self.precond.iter().enumerate() {
            let scale = p.noise_scale * p.offset;
            for i in 0..r.ncols() {
                r[[row, i]] += scale * reference[[row, i]] + self.noise[[row, i]];
            }
        }
        r
    }
}

/// Hybrid score-matching loss on a batch: the mean over rows and
/// dimensions of `lambda(t) |S - target|^2` with `lambda = noise_scale^2`.
pub fn hsm_loss_value(net: &ScoreNet, batch: &HsmBatch) -> f64 {
    let input = net.inputs(&batch.x.view(), batch.eta.as_ref().map(|e| e.view()).as_ref(), &batch.precond, &batch.t);
    batch.loss_for_output(&net.mlp.forward(input.view()))
}

/// Loss and its gradient with respect to every network layer.
pub fn hsm_loss(net: &ScoreNet, batch: &HsmBatch) -> (f64, Vec<Linear>) {
    let input = net.inputs(&batch.x.view(), batch.eta.as_ref().map(|e| e.view()).as_ref(), &batch.precond, &batch.t);
    let (n, cache) = net.mlp.forward_cached(input.view());
    let r = batch.residual(&n);
    let scale = 1.0 / r.len() as f64;
    let loss = r.iter().map(|v| v * v).sum::<f64>() * scale;
    let grad_out = r.mapv(|v| 2.0 * scale * v);
    (loss, net.mlp.backward(&cache, grad_out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{marginal_moments, KernelMoments};
    use crate::rng;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn active_params() -> DiffusionParams {
        DiffusionParams::active(2.0, 0.15, 0.25, 1.0)
    }

    fn small_config() -> NetConfig {
        NetConfig { hidden: vec![8, 8], time_features: 4, t_min_fraction: 1e-3 }
    }

    #[test]
    fn zero_output_layer_gives_the_reference_score() {
        let p = active_params();
        let net = ScoreNet::new(p, 2, 0.2, small_config(), &mut rng::stream(0, 0)).unwrap();
        let x = array![[0.1, -0.3], [1.0, 2.0]];
        let eta = array![[0.5, -0.2], [0.0, 1.5]];
        let s = net.mixed_score(x.view(), Some(eta.view()), 0.4).unwrap();
        let m22 = p.t_a / p.tau;
        for (sv, ev) in s.iter().zip(eta.iter()) {
            assert_eq!(*sv, -ev / m22);
        }
    }

    #[test]
    fn precond_kernel_matches_marginal_moments() {
        let p = active_params();
        for &t in &[1e-3, 0.05, 0.5, 1.0] {
            let pc = Precond::new(&p, 0.2, t).unwrap();
            let m: KernelMoments = marginal_moments(&p, t).unwrap();
            let (l11, l21, l22) = pc.chol;
            assert_relative_eq!(l11 * l11, m.m11, max_relative = 1e-12);
            assert_relative_eq!(l11 * l21, m.m12, max_relative = 1e-12);
            assert_relative_eq!(l21 * l21 + l22 * l22, m.m22, max_relative = 1e-9);
            assert_relative_eq!(m.m22, p.t_a / p.tau, max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_unsupported_processes() {
        let cfg = small_config();
        let mut r = rng::stream(0, 0);
        let with_tp = active_params().with_passive_temperature(0.1);
        assert!(ScoreNet::new(with_tp, 2, 1.0, cfg.clone(), &mut r).is_err());
        assert!(ScoreNet::new(DiffusionParams::passive(1.0, 0.0, 1.0), 2, 1.0, cfg.clone(), &mut r).is_err());
        assert!(ScoreNet::new(active_params(), 0, 1.0, cfg.clone(), &mut r).is_err());
        let net = ScoreNet::new(active_params(), 2, 1.0, cfg, &mut r).unwrap();
        assert!(net.mixed_score(array![[0.0, 0.0]].view(), None, 0.5).is_err());
        assert!(net.precond(0.0).is_err());
    }
}
