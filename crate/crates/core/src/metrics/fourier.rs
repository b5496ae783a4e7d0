//! Time derivative of a Fourier mode of the forward kernel (unit
//! stiffness, `T_p = 0` for the active process).
//!
//! The rate has an oscillatory part `i q x_0 e^{-t} P` and a real part that
//! controls growth or decay of mode `q`. Two forms are evaluated for each
//! process: the full expression and its small-time expansion.
//!
//! ```text
//! passive  full:    -T q^2 e^{-2t}
//!          small t: -T q^2 (1 - 2t)
//! active   full:    -T_a q^2 / (tau - 1)^2 [e^{-2t} - (1 - 2 tau)/tau^2 e^{-2t/tau}
//!                                            - 2 e^{-(1 + 1/tau) t}]
//!          small t: -T_a q^2 / tau^2 (2t/tau - 1)
//! ```
//!
//! The active full form tends to the passive one (with `T = T_a`) as
//! `tau → 0`.

/// Components of the rate for one process.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeRate {
    /// Coefficient of `i P` in the full expression, `q x_0 e^{-t}`.
    pub oscillatory: f64,
    /// Coefficient of `i P` in the small-time expansion, `q x_0 (1 - t)`.
    pub oscillatory_small_t: f64,
    pub real: f64,
    pub real_small_t: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierRates {
    pub passive: ModeRate,
    pub active: ModeRate,
}

/// `|tau - 1|` below which the active bracket is summed from its Taylor
/// series instead (the closed form divides by `(tau - 1)^2`).
const NEAR_ONE: f64 = 1e-3;

fn active_bracket_over_delta2(t: f64, tau: f64) -> f64 {
    let d = tau - 1.0;
    if d.abs() < NEAR_ONE {
        let e = (-2.0 * t).exp();
        let c0 = t * t - 1.0;
        let c1 = t.powi(3) - 2.0 * t * t - 2.0 * t + 2.0;
        let c2 = (7.0 * t.powi(4) - 36.0 * t.powi(3) + 12.0 * t * t + 72.0 * t - 36.0) / 12.0;
        return e * (c0 + d * (c1 + d * c2));
    }
    let bracket = (-2.0 * t).exp() - (1.0 - 2.0 * tau) / (tau * tau) * (-2.0 * t / tau).exp()
        - 2.0 * (-(1.0 + 1.0 / tau) * t).exp();
    bracket / (d * d)
}

/// Rates of Fourier mode `q` at time `t` for a passive process of
/// temperature `t_passive` and an active process `(t_a, tau)`.
pub fn fourier_decay_rates(q: f64, x0: f64, t: f64, t_passive: f64, t_a: f64, tau: f64) -> FourierRates {
    let q2 = q * q;
    let osc = q * x0 * (-t).exp();
    let osc_small = q * x0 * (1.0 - t);
    let passive = ModeRate {
        oscillatory: osc,
        oscillatory_small_t: osc_small,
        real: -t_passive * q2 * (-2.0 * t).exp(),
        real_small_t: -t_passive * q2 * (1.0 - 2.0 * t),
    };
    let active = ModeRate {
        oscillatory: osc,
        oscillatory_small_t: osc_small,
        real: -t_a * q2 * active_bracket_over_delta2(t, tau),
        real_small_t: -t_a * q2 / (tau * tau) * (2.0 * t / tau - 1.0),
    };
    FourierRates { passive, active }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_matches_closed_form_near_tau_one() {
        for &t in &[0.0f64, 0.1, 0.5, 1.3] {
            for &tau in &[1.0f64 - 1.5e-3, 1.0 + 1.5e-3] {
                let closed = {
                    let b = (-2.0 * t).exp() - (1.0 - 2.0 * tau) / (tau * tau) * (-2.0 * t / tau).exp()
                        - 2.0 * (-(1.0 + 1.0 / tau) * t).exp();
                    b / ((tau - 1.0) * (tau - 1.0))
                };
                let d = tau - 1.0;
                let e = (-2.0 * t).exp();
                let series = e
                    * ((t * t - 1.0)
                        + d * (t.powi(3) - 2.0 * t * t - 2.0 * t + 2.0)
                        + d * d * (7.0 * t.powi(4) - 36.0 * t.powi(3) + 12.0 * t * t + 72.0 * t - 36.0) / 12.0);
                assert!((closed - series).abs() < 1e-6 * closed.abs().max(1.0), "t={t} tau={tau}");
            }
        }
    }

    #[test]
    fn at_time_zero_small_t_and_full_agree() {
        for &tau in &[0.3, 0.5, 2.0] {
            let r = fourier_decay_rates(3.0, 0.4, 0.0, 1.0, 1.0, tau);
            assert!((r.active.real - r.active.real_small_t).abs() < 1e-9 * r.active.real.abs());
            assert!((r.passive.real - r.passive.real_small_t).abs() < 1e-12);
        }
    }
}
