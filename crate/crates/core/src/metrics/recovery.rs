//! Per-peak statistics of samples generated for a mixture target.

use ndarray::ArrayView2;

use crate::error::{ensure_dim, Error, Result};
use crate::mixture::GaussianMixture;

/// Samples farther than this many peak standard deviations from their
/// nearest mean are counted as unassigned.
pub const UNASSIGNED_SIGMAS: f64 = 6.0;

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureRecoveryReport {
    /// Samples assigned to each peak, in the mixture's component order.
    pub counts: Vec<usize>,
    /// Per-peak sample standard deviation (root mean per-dimension variance
    /// about the assigned samples' mean); 0 with fewer than two samples.
    pub stds: Vec<f64>,
    pub unassigned: usize,
    pub total: usize,
}

impl MixtureRecoveryReport {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.total as f64).collect()
    }

    pub fn unassigned_fraction(&self) -> f64 {
        self.unassigned as f64 / self.total as f64
    }
}

/// Assigns each sample to its nearest mean (Euclidean) and accumulates
/// per-peak counts and spreads.
pub fn mixture_recovery(samples: ArrayView2<f64>, mix: &GaussianMixture) -> Result<MixtureRecoveryReport> {
    if samples.nrows() == 0 {
        return Err(Error::invalid("no samples"));
    }
    ensure_dim(mix.dim(), samples.ncols())?;
    let comps = mix.components();
    let d = mix.dim();
    let sigma: Vec<f64> = comps.iter().map(|c| (c.variance.iter().sum::<f64>() / d as f64).sqrt()).collect();
    let mut counts = vec![0usize; comps.len()];
    let mut sums = vec![vec![0.0; d]; comps.len()];
    let mut sq = vec![vec![0.0; d]; comps.len()];
    let mut unassigned = 0;
    for row in samples.rows() {
        let (best, dist) = comps
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let d2: f64 = row.iter().zip(&c.mean).map(|(x, m)| (x - m) * (x - m)).sum();
                (k, d2.sqrt())
            })
            .fold((0, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc });
        if dist > UNASSIGNED_SIGMAS * sigma[best] {
            unassigned += 1;
            continue;
        }
        counts[best] += 1;
        for (i, &x) in row.iter().enumerate() {
            // Accumulate about the peak mean for numerical stability.
            let r = x - comps[best].mean[i];
            sums[best][i] += r;
            sq[best][i] += r * r;
        }
    }
    let stds = (0..comps.len())
        .map(|k| {
            let n = counts[k] as f64;
            if counts[k] < 2 {
                return 0.0;
            }
            let var: f64 = (0..d).map(|i| (sq[k][i] - sums[k][i] * sums[k][i] / n) / (n - 1.0)).sum::<f64>() / d as f64;
            var.max(0.0).sqrt()
        })
        .collect();
    Ok(MixtureRecoveryReport { counts, stds, unassigned, total: samples.nrows() })
}
