//! Axis-aligned Gaussian mixtures used as analytic targets.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One peak: weight `p`, mean `mu` and per-dimension variance `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// A validated mixture in canonical component order.
///
/// Components are sorted on construction, so two mixtures that differ only
/// by a permutation of their peaks evaluate bit-identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<MixtureComponent>", into = "Vec<MixtureComponent>")]
pub struct GaussianMixture {
    components: Vec<MixtureComponent>,
    dim: usize,
}

impl TryFrom<Vec<MixtureComponent>> for GaussianMixture {
    type Error = Error;

    fn try_from(components: Vec<MixtureComponent>) -> Result<Self> {
        Self::new(components)
    }
}

impl From<GaussianMixture> for Vec<MixtureComponent> {
    fn from(m: GaussianMixture) -> Self {
        m.components
    }
}

impl GaussianMixture {
    pub fn new(mut components: Vec<MixtureComponent>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::invalid("mixture has no components"))?;
        let dim = first.mean.len();
        if dim == 0 {
            return Err(Error::invalid("mixture components must have dimension >= 1"));
        }
        let mut total = 0.0;
        for (i, c) in components.iter().enumerate() {
            if c.mean.len() != dim || c.variance.len() != dim {
                return Err(Error::invalid(format!("component {i} does not have dimension {dim}")));
            }
            if !(c.weight >= 0.0) || !c.weight.is_finite() {
                return Err(Error::invalid(format!("component {i} has invalid weight {}", c.weight)));
            }
            if !c.mean.iter().all(|v| v.is_finite()) {
                return Err(Error::invalid(format!("component {i} has a non-finite mean")));
            }
            if !c.variance.iter().all(|&h| h > 0.0 && h.is_finite()) {
                return Err(Error::invalid(format!("component {i} needs positive finite variances")));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("weights sum to {total}, expected 1")));
        }
        components.sort_by(|a, b| {
            a.mean
                .iter()
                .zip(&b.mean)
                .map(|(x, y)| x.total_cmp(y))
                .chain(a.variance.iter().zip(&b.variance).map(|(x, y)| x.total_cmp(y)))
                .chain(std::iter::once(a.weight.total_cmp(&b.weight)))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        Ok(Self { components, dim })
    }

    /// Equal-weight isotropic peaks of standard deviation `sigma`.
    pub fn isotropic(means: &[Vec<f64>], sigma: f64) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::invalid("mixture has no components"));
        }
        let w = 1.0 / means.len() as f64;
        let comps = means
            .iter()
            .map(|m| MixtureComponent { weight: w, mean: m.clone(), variance: vec![sigma * sigma; m.len()] })
            .collect::<Vec<_>>();
        // Equal weights of 1/n may not sum to exactly 1 in floating point.
        let total: f64 = comps.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("too many components for equal weights"));
        }
        Self::new(comps)
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for c in &self.components {
            for (mi, &ci) in m.iter_mut().zip(&c.mean) {
                *mi += c.weight * ci;
            }
        }
        m
    }

    /// Covariance of the mixture: within-peak variances plus the spread of
    /// the means.
    pub fn covariance(&self) -> Array2<f64> {
        let mu = self.mean();
        let mut cov = Array2::zeros((self.dim, self.dim));
        for c in &self.components {
            for i in 0..self.dim {
                cov[[i, i]] += c.weight * c.variance[i];
                for j in 0..self.dim {
                    cov[[i, j]] += c.weight * (c.mean[i] - mu[i]) * (c.mean[j] - mu[j]);
                }
            }
        }
        cov
    }

    /// Draw `n` samples as rows.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Array2<f64> {
        let mut out = Array2::zeros((n, self.dim));
        for mut row in out.rows_mut() {
            let c = self.pick(rng.random::<f64>());
            for (i, v) in row.iter_mut().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                *v = c.mean[i] + c.variance[i].sqrt() * z;
            }
        }
        out
    }

    fn pick(&self, u: f64) -> &MixtureComponent {
        let mut acc = 0.0;
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                return c;
            }
        }
        self.components.last().expect("non-empty mixture")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn comp(w: f64, m: f64) -> MixtureComponent {
        MixtureComponent { weight: w, mean: vec![m], variance: vec![1.0] }
    }

    #[test]
    fn validation() {
        assert!(GaussianMixture::new(vec![]).is_err());
        assert!(GaussianMixture::new(vec![comp(0.5, 0.0)]).is_err());
        assert!(GaussianMixture::new(vec![comp(0.5, 0.0), comp(0.5, 1.0)]).is_ok());
        let bad_var = MixtureComponent { weight: 1.0, mean: vec![0.0], variance: vec![0.0] };
        assert!(GaussianMixture::new(vec![bad_var]).is_err());
        let bad_dim = MixtureComponent { weight: 0.5, mean: vec![0.0, 1.0], variance: vec![1.0, 1.0] };
        assert!(GaussianMixture::new(vec![comp(0.5, 0.0), bad_dim]).is_err());
    }

    #[test]
    fn order_is_canonical() {
        let a = GaussianMixture::new(vec![comp(0.25, 3.0), comp(0.75, -1.0)]).unwrap();
        let b = GaussianMixture::new(vec![comp(0.75, -1.0), comp(0.25, 3.0)]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn serde_roundtrip_validates() {
        let m = GaussianMixture::new(vec![comp(0.25, 3.0), comp(0.75, -1.0)]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: GaussianMixture = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
        let bad = r#"[{"weight": 0.2, "mean": [0.0], "variance": [1.0]}]"#;
        assert!(serde_json::from_str::<GaussianMixture>(bad).is_err());
    }

    #[test]
    fn sample_moments() {
        let m = GaussianMixture::new(vec![comp(0.25, 3.0), comp(0.75, -1.0)]).unwrap();
        let s = m.sample(200_000, &mut rng::stream(3, 0));
        let mean = s.mean().unwrap();
        let var = s.var(0.0);
        assert!((mean - 0.0).abs() < 0.02, "{mean}");
        // 1 + 0.25*9 + 0.75*1 - 0 = 4
        assert!((var - m.covariance()[[0, 0]]).abs() < 0.05, "{var}");
    }
}
