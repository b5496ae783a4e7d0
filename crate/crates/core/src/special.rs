//! Small special functions needed by the kernel series.

/// Regularized lower incomplete gamma function P(n + 1, z) for integer shape.
///
/// Equals the probability that a Poisson(z) variable exceeds n. Both branches
/// sum positive terms only.
pub(crate) fn lower_gamma_reg_int(n: u32, z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z.is_infinite() {
        return 1.0;
    }
    let shape = f64::from(n) + 1.0;
    if z < shape + 1.0 {
        // e^{-z} sum_{j > n} z^j / j!
        let ln_first = -z + shape * z.ln() - ln_factorial(n + 1);
        let mut term = ln_first.exp();
        let mut sum = term;
        let mut j = shape;
        loop {
            j += 1.0;
            term *= z / j;
            sum += term;
            if term <= sum * 1e-17 {
                break;
            }
        }
        sum
    } else {
        // 1 - e^{-z} sum_{j <= n} z^j / j!, with the subtracted tail below 1/2.
        let mut term = (-z).exp();
        let mut tail = term;
        for j in 1..=n {
            term *= z / f64::from(j);
            tail += term;
        }
        1.0 - tail
    }
}

pub(crate) fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|j| f64::from(j).ln()).sum()
}

/// `(1 - e^{-alpha t}) / alpha`, the integral of `e^{-alpha s}` over `[0, t]`.
pub(crate) fn exp_integral(alpha: f64, t: f64) -> f64 {
    if t.is_infinite() {
        1.0 / alpha
    } else {
        -(-alpha * t).exp_m1() / alpha
    }
}

/// `(e^{d t} - 1) / d`, continuous through `d = 0`.
pub(crate) fn expm1_ratio(d: f64, t: f64) -> f64 {
    if d == 0.0 {
        t
    } else {
        (d * t).exp_m1() / d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_lower_gamma(n: u32, z: f64) -> f64 {
        // composite Simpson of s^n e^{-s} / n! on [0, z]
        let steps = 200_000;
        let h = z / steps as f64;
        let f = |s: f64| s.powi(n as i32) * (-s).exp();
        let mut acc = f(0.0) + f(z);
        for i in 1..steps {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        acc * h / 3.0 / ln_factorial(n).exp()
    }

    #[test]
    fn lower_gamma_matches_quadrature() {
        for &n in &[0u32, 1, 2, 5, 9] {
            for &z in &[1e-3, 0.3, 1.0, 4.0, 12.0, 40.0] {
                let got = lower_gamma_reg_int(n, z);
                let want = brute_lower_gamma(n, z);
                assert!(
                    (got - want).abs() <= 1e-9 * want.max(1e-300) + 1e-13,
                    "n={n} z={z} got={got} want={want}"
                );
            }
        }
    }

    #[test]
    fn lower_gamma_small_argument_keeps_relative_precision() {
        // P(3, z) ~ z^3 / 6 for tiny z
        let z = 1e-6;
        let got = lower_gamma_reg_int(2, z);
        assert!((got / (z * z * z / 6.0) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn exp_helpers_limits() {
        assert_eq!(expm1_ratio(0.0, 0.7), 0.7);
        assert!((expm1_ratio(1e-12, 0.7) - 0.7).abs() < 1e-12);
        assert_eq!(exp_integral(2.0, f64::INFINITY), 0.5);
    }
}
