//! Fixed text formatting of floating-point values.

/// Significant digits kept when writing floats.
pub const SIGNIFICANT_DIGITS: usize = 9;

/// Round to [`SIGNIFICANT_DIGITS`] significant digits, then print the
/// shortest representation of the rounded value. Plain notation is used for
/// magnitudes in `[1e-4, 1e15)`, scientific notation otherwise.
pub fn format_float(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v).parse().unwrap_or(v);
    let a = rounded.abs();
    if (1e-4..1e15).contains(&a) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}
