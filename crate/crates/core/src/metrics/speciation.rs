//! Speciation times: the forward time after which trajectories from
//! different modes of the data can no longer be told apart.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::ArrayView2;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpeciationTimes {
    /// `1/2 ln(lambda_max / T_p)`
    pub passive: f64,
    /// `1/2 ln(lambda_max (1 + tau) / T_a)`
    pub active: f64,
    pub lambda_max: f64,
}

/// Both speciation times from the largest eigenvalue of the data
/// covariance `c0`.
pub fn speciation_times(c0: ArrayView2<f64>, t_p: f64, t_a: f64, tau: f64) -> Result<SpeciationTimes> {
    let n = c0.nrows();
    if n == 0 || c0.ncols() != n {
        return Err(Error::invalid("C0 must be a non-empty square matrix"));
    }
    if !(t_p > 0.0) || !(t_a > 0.0) || !t_p.is_finite() || !t_a.is_finite() {
        return Err(Error::invalid("temperatures must be positive and finite"));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::invalid("tau must be positive and finite"));
    }
    if !c0.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("C0 must be finite"));
    }
    let scale = c0.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..i {
            if (c0[[i, j]] - c0[[j, i]]).abs() > 1e-12 * scale {
                return Err(Error::invalid("C0 must be symmetric"));
            }
        }
    }
    let m = DMatrix::from_fn(n, n, |i, j| c0[[i, j]]);
    let eig = SymmetricEigen::new(m).eigenvalues;
    let lambda_min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda_max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lambda_min < -1e-12 * scale {
        return Err(Error::invalid("C0 must be positive semidefinite"));
    }
    if !(lambda_max > 0.0) {
        return Err(Error::invalid("C0 must have a positive eigenvalue"));
    }
    Ok(SpeciationTimes {
        passive: 0.5 * (lambda_max / t_p).ln(),
        active: 0.5 * (lambda_max * (1.0 + tau) / t_a).ln(),
        lambda_max,
    })
}
