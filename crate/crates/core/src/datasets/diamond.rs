use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::mixture::GaussianMixture;

/// Nine equal-weight isotropic peaks of standard deviation `sigma`: one at
/// the origin and eight on a circle of radius `r` at multiples of 45°.
pub fn diamond_mixture(r: f64, sigma: f64) -> Result<GaussianMixture> {
    if !(r > 0.0 && r.is_finite()) || !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("diamond needs positive finite spacing and width"));
    }
    let d = r * FRAC_1_SQRT_2;
    let means = [
        [0.0, 0.0],
        [r, 0.0],
        [d, d],
        [0.0, r],
        [-d, d],
        [-r, 0.0],
        [-d, -d],
        [0.0, -r],
        [d, -d],
    ];
    GaussianMixture::isotropic(&means.iter().map(|m| m.to_vec()).collect::<Vec<_>>(), sigma)
}
