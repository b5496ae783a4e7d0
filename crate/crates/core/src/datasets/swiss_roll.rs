//! Swiss-roll point clouds built from a fixed table of constants.
//!
//! Each roll is the Archimedean spiral `r = c θ` for `θ ∈ [θ0, θ1]`, scaled
//! and translated, with isotropic Gaussian jitter added to every point.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::Dataset2D;
use crate::rng;

/// The constants that define every Swiss-roll variant.
pub struct SwissRollConstants {
    /// Spiral pitch `c` (radius gained per radian).
    pub pitch: f64,
    pub theta_start: f64,
    pub theta_end: f64,
    /// Scale and centres for [`SwissRollVariant::Multiple`].
    pub multiple_scale: f64,
    pub multiple_centres: [[f64; 2]; 3],
    /// Scale and centres for [`SwissRollVariant::Overlapping`].
    pub overlapping_scale: f64,
    pub overlapping_centres: [[f64; 2]; 5],
}

/// Three full turns reaching unit radius; arms are `2π c ≈ 0.286` apart.
pub const SWISS_ROLL: SwissRollConstants = SwissRollConstants {
    pitch: 1.0 / (7.0 * PI),
    theta_start: PI,
    theta_end: 7.0 * PI,
    multiple_scale: 0.5,
    multiple_centres: [[-1.2, -0.6], [1.2, -0.6], [0.0, 1.2]],
    overlapping_scale: 0.5,
    overlapping_centres: [[0.0, 0.0], [0.6, 0.0], [-0.6, 0.0], [0.0, 0.6], [0.0, -0.6]],
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwissRollVariant {
    Single,
    /// Three disjoint half-size rolls.
    Multiple,
    /// Five half-size rolls whose supports overlap.
    Overlapping,
}

impl SwissRollVariant {
    fn layout(self) -> (f64, &'static [[f64; 2]]) {
        match self {
            SwissRollVariant::Single => (1.0, &[[0.0, 0.0]]),
            SwissRollVariant::Multiple => (SWISS_ROLL.multiple_scale, &SWISS_ROLL.multiple_centres),
            SwissRollVariant::Overlapping => (SWISS_ROLL.overlapping_scale, &SWISS_ROLL.overlapping_centres),
        }
    }
}

/// `n` points; point `i` belongs to roll `i mod count`. The angle is
/// uniform on `[θ0, θ1]`. `noise` is the jitter standard deviation in
/// output units.
pub fn swiss_roll(n: usize, noise: f64, variant: SwissRollVariant, seed: u64) -> crate::Result<Dataset2D> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(crate::Error::invalid("noise must be non-negative and finite"));
    }
    let (scale, centres) = variant.layout();
    let c = &SWISS_ROLL;
    let mut r = rng::stream(seed, 0);
    let mut samples = Array2::zeros((n, 2));
    for (i, mut row) in samples.rows_mut().into_iter().enumerate() {
        let theta = c.theta_start + (c.theta_end - c.theta_start) * r.random::<f64>();
        let rad = c.pitch * theta * scale;
        let centre = centres[i % centres.len()];
        let jx: f64 = r.sample(StandardNormal);
        let jy: f64 = r.sample(StandardNormal);
        row[0] = centre[0] + rad * theta.cos() + noise * jx;
        row[1] = centre[1] + rad * theta.sin() + noise * jy;
    }
    Ok(Dataset2D { samples, provenance: format!("swiss_roll:{variant:?}:n={n}:noise={noise}:seed={seed}"), normalization: None })
}
