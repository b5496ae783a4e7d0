//! Forward kernels against Monte-Carlo path oracles.

mod common;

use active_diffusion::process::{
    forward_exact, forward_exact_marginal, forward_path, kernel_moments, marginal_kernel_x0, prior_sample,
    reverse_drift, stationary_moments, DiffusionParams, JointState,
};
use active_diffusion::rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn joint_kernel_matches_em_paths_at_half_time() {
    let p = DiffusionParams::active(1.0, 1.0, 0.5, 1.0);
    let m = kernel_moments(&p, 0.5).unwrap();
    let e = common::em_moments(1.0, 0.0, 1.0, 0.5, 0.0, Some(0.0), 1e-3, &[500], 100_000, 1, |_| (0.0, 0.0))[0];
    assert!(rel(e.0, m.m11) < 0.02, "m11 {} vs {}", e.0, m.m11);
    assert!(rel(e.1, m.m12) < 0.02, "m12 {} vs {}", e.1, m.m12);
    assert!(rel(e.2, m.m22) < 0.02, "m22 {} vs {}", e.2, m.m22);
}

#[test]
fn joint_kernel_with_passive_noise_matches_em_paths() {
    let p = DiffusionParams::active(1.5, 0.5, 0.4, 1.0).with_passive_temperature(0.2);
    let m = kernel_moments(&p, 0.7).unwrap();
    let e = common::em_moments(1.5, 0.2, 0.5, 0.4, 0.0, Some(0.0), 1e-3, &[700], 100_000, 2, |_| (0.0, 0.0))[0];
    assert!(rel(e.0, m.m11) < 0.02, "m11 {} vs {}", e.0, m.m11);
    assert!(rel(e.1, m.m12) < 0.02, "m12 {} vs {}", e.1, m.m12);
    assert!(rel(e.2, m.m22) < 0.02, "m22 {} vs {}", e.2, m.m22);
}

#[test]
fn marginal_kernel_matches_em_paths_from_the_eta_prior() {
    let (k, t_a, tau) = (1.0, 0.04, 0.25);
    let p = DiffusionParams::active(k, t_a, tau, 1.0);
    let x0 = [1.0, -1.0];
    let kern = marginal_kernel_x0(&p, 0.3, &x0).unwrap();
    for (i, &x0i) in x0.iter().enumerate() {
        let mean_x = kern.mean_x[i];
        let e = common::em_moments(k, 0.0, t_a, tau, x0i, None, 1e-3, &[300], 100_000, 10 + i as u64, |_| (mean_x, 0.0))[0];
        assert!(rel(e.0, kern.cov.m11) < 0.02, "m11 {} vs {}", e.0, kern.cov.m11);
        assert!(rel(e.1, kern.cov.m12) < 0.02, "m12 {} vs {}", e.1, kern.cov.m12);
        assert!(rel(e.2, kern.cov.m22) < 0.02, "m22 {} vs {}", e.2, kern.cov.m22);
    }
    assert_eq!(kern.mean_eta, vec![0.0, 0.0]);
}

#[test]
fn marginal_kernel_limits() {
    let p = DiffusionParams::active(1.0, 0.04, 0.25, 1.0);
    let k0 = marginal_kernel_x0(&p, 0.0, &[0.3]).unwrap();
    assert_eq!(k0.mean_x, vec![0.3]);
    assert_eq!((k0.cov.m11, k0.cov.m12), (0.0, 0.0));
    assert!((k0.cov.m22 - 0.04 / 0.25).abs() < 1e-15);
    let kinf = marginal_kernel_x0(&p, 60.0, &[0.3]).unwrap();
    let s = stationary_moments(&p).unwrap();
    assert!(kinf.mean_x[0].abs() < 1e-20);
    assert!(rel(kinf.cov.m11, s.m11) < 1e-12 && rel(kinf.cov.m12, s.m12) < 1e-12 && rel(kinf.cov.m22, s.m22) < 1e-12);
}

/// Moments of many independent one-shot draws or paths.
fn moments(states: &[JointState]) -> (f64, f64, f64, f64, f64) {
    let n = states.len() as f64;
    let mx = states.iter().map(|s| s.x[0]).sum::<f64>() / n;
    let me = states.iter().map(|s| s.eta[0]).sum::<f64>() / n;
    let c = |f: &dyn Fn(&JointState) -> f64| states.iter().map(f).sum::<f64>() / n;
    (
        mx,
        me,
        c(&|s| (s.x[0] - mx).powi(2)),
        c(&|s| (s.x[0] - mx) * (s.eta[0] - me)),
        c(&|s| (s.eta[0] - me).powi(2)),
    )
}

#[test]
fn one_shot_and_pathwise_sampling_agree() {
    let p = DiffusionParams::active(1.0, 1.0, 0.5, 1.0);
    let n = 100_000;
    let mut r = rng::stream(3, 0);
    let paths: Vec<JointState> = (0..n).map(|_| forward_path(&p, &[0.5], 1e-3, 1000, &mut r).unwrap().pop().unwrap()).collect();
    let shots: Vec<JointState> = (0..n).map(|_| forward_exact_marginal(&p, &[0.5], 1.0, &mut r).unwrap()).collect();
    let (a, b) = (moments(&paths), moments(&shots));
    let sd = (p.t_a / p.tau).sqrt();
    // Means: within 4 standard errors; covariance entries: 2% relative.
    assert!((a.0 - b.0).abs() < 4.0 * (2.0 * a.2 / n as f64).sqrt(), "x means {} {}", a.0, b.0);
    assert!((a.1 - b.1).abs() < 4.0 * sd * (2.0 / n as f64).sqrt(), "eta means {} {}", a.1, b.1);
    assert!(rel(a.2, b.2) < 0.02 && rel(a.3, b.3) < 0.02 && rel(a.4, b.4) < 0.02, "{a:?} vs {b:?}");
}

#[test]
fn passive_path_variance_is_delta() {
    let p = DiffusionParams::passive(1.0, 1.0, 1.0);
    let mut r = rng::stream(4, 0);
    let n = 100_000;
    let xs: Vec<f64> = (0..n).map(|_| forward_path(&p, &[0.0], 1e-3, 1000, &mut r).unwrap()[1000].x[0]).collect();
    let v = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
    let delta = 1.0 - (-2.0f64).exp();
    assert!(rel(v, delta) < 0.02, "{v} vs {delta}");
}

#[test]
fn exact_draws_have_kernel_moments() {
    let p = DiffusionParams::active(2.0, 0.3, 2.0, 1.0);
    let m = kernel_moments(&p, 0.8).unwrap();
    let mut r = rng::stream(5, 0);
    let shots: Vec<JointState> = (0..100_000).map(|_| forward_exact(&p, &[1.0], &[0.5], 0.8, &mut r).unwrap()).collect();
    let s = moments(&shots);
    assert!((s.0 - (m.a + 0.5 * m.bcoef)).abs() < 0.01);
    assert!((s.1 - 0.5 * m.b).abs() < 0.01);
    assert!(rel(s.2, m.m11) < 0.02 && rel(s.3, m.m12) < 0.02 && rel(s.4, m.m22) < 0.02);
}

#[test]
fn prior_variances() {
    let mut r = rng::stream(6, 0);
    let n = 100_000;
    let p = DiffusionParams::passive(1.0, 1.0, 1.0);
    let v = (0..n).map(|_| prior_sample(&p, 1, &mut r).unwrap().x[0].powi(2)).sum::<f64>() / n as f64;
    // Standard error of a variance estimate is sqrt(2/n).
    assert!((v - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt(), "{v}");
    let a = DiffusionParams::active(1.0, 1.0, 0.5, 1.0);
    let v = (0..n).map(|_| prior_sample(&a, 1, &mut r).unwrap().eta[0].powi(2)).sum::<f64>() / n as f64;
    assert!((v - 2.0).abs() < 3.0 * 2.0 * (2.0 / n as f64).sqrt(), "{v}");
}

#[test]
fn zero_eta_score_and_state_give_zero_eta_drift() {
    let p = DiffusionParams::active(1.0, 1.0, 0.5, 1.0);
    let s = JointState::new(vec![0.4, -0.2], vec![0.0, 0.0], 0.5).unwrap();
    let (dx, de) = reverse_drift(&p, &s, &[], &[0.0, 0.0]).unwrap();
    assert_eq!(de, vec![0.0, 0.0]);
    assert_eq!(dx, vec![0.4, -0.2]);
    assert!(reverse_drift(&p, &s, &[], &[0.0]).is_err());
}
