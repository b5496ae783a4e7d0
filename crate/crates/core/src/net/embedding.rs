//! Sinusoidal features of the diffusion time.

/// Lowest and highest angular frequency, applied to `t / t_f`.
const OMEGA_MIN: f64 = 1.0;
const OMEGA_MAX: f64 = 1000.0;

/// Writes `n` features `(sin(w_j s), cos(w_j s))` of `s = t / t_f` into
/// `out`, with `n / 2` frequencies spaced geometrically between
/// [`OMEGA_MIN`] and [`OMEGA_MAX`]. `n` must be even.
pub fn time_features_into(t: f64, t_f: f64, out: &mut [f64]) {
    let half = out.len() / 2;
    let s = t / t_f;
    for j in 0..half {
        let frac = if half > 1 { j as f64 / (half - 1) as f64 } else { 0.0 };
        let w = OMEGA_MIN * (OMEGA_MAX / OMEGA_MIN).powf(frac);
        let (sin, cos) = (w * s).sin_cos();
        out[2 * j] = sin;
        out[2 * j + 1] = cos;
    }
}
