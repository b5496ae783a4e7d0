//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Second moments `(E[x^2], E[x eta], E[eta^2])` of Euler-Maruyama paths of
///
/// ```text
/// dx   = (-k x + eta) dt + sqrt(2 T_p) dW1
/// deta = -eta / tau dt + sqrt(2 T_a) / tau dW2
/// ```
///
/// started from `(x0, eta0)` (or `eta0 ~ N(0, T_a/tau)` when `eta0` is
/// `None`), recorded at each of `record_steps` after subtracting `mean`.
#[allow(clippy::too_many_arguments)]
pub fn em_moments(
    k: f64,
    t_p: f64,
    t_a: f64,
    tau: f64,
    x0: f64,
    eta0: Option<f64>,
    dt: f64,
    record_steps: &[usize],
    n_paths: usize,
    seed: u64,
    mean: impl Fn(usize) -> (f64, f64),
) -> Vec<(f64, f64, f64)> {
    let mut r = rng(seed);
    let max_step = *record_steps.iter().max().unwrap();
    let sx = (2.0 * t_p * dt).sqrt();
    let se = (2.0 * t_a).sqrt() / tau * dt.sqrt();
    let mut acc = vec![(0.0, 0.0, 0.0); record_steps.len()];
    for _ in 0..n_paths {
        let mut x = x0;
        let mut e = match eta0 {
            Some(v) => v,
            None => (t_a / tau).sqrt() * r.sample::<f64, _>(StandardNormal),
        };
        let mut next = 0;
        for step in 1..=max_step {
            let nx: f64 = if sx > 0.0 { r.sample(StandardNormal) } else { 0.0 };
            let ne: f64 = r.sample(StandardNormal);
            let xn = x + (-k * x + e) * dt + sx * nx;
            e += -e / tau * dt + se * ne;
            x = xn;
            while next < record_steps.len() && record_steps[next] == step {
                let (mx, me) = mean(next);
                let (dx, de) = (x - mx, e - me);
                acc[next].0 += dx * dx;
                acc[next].1 += dx * de;
                acc[next].2 += de * de;
                next += 1;
            }
        }
    }
    let n = n_paths as f64;
    acc.into_iter().map(|(a, b, c)| (a / n, b / n, c / n)).collect()
}

/// Direct double loop over anchors and window offsets with periodic wrap.
pub fn brute_force_convolution(lattices: &[Array2<i8>], l_values: &[usize]) -> Vec<f64> {
    let side = lattices[0].nrows();
    l_values
        .iter()
        .map(|&l| {
            let mut ensemble = 0.0;
            for lat in lattices {
                let mut total: u64 = 0;
                for i in 0..side {
                    for j in 0..side {
                        let mut s: i64 = 0;
                        for u in 0..l {
                            for v in 0..l {
                                s += i64::from(lat[[(i + u) % side, (j + v) % side]]);
                            }
                        }
                        total += s.unsigned_abs();
                    }
                }
                ensemble += total as f64 / (l * l * side * side) as f64;
            }
            ensemble / lattices.len() as f64
        })
        .collect()
}

/// Exact `<|m|>` of the periodic `side × side` Ising model (`J = 1`) by
/// enumerating all `2^(side^2)` states.
pub fn ising_exact_abs_magnetization(side: usize, temperature: f64) -> f64 {
    let n = side * side;
    assert!(n <= 20);
    let (mut z, mut zm) = (0.0, 0.0);
    // Energies are shifted by the ground-state energy to avoid overflow.
    let e0 = -2.0 * n as f64;
    for state in 0u32..(1u32 << n) {
        let spin = |i: usize, j: usize| if state >> ((i % side) * side + (j % side)) & 1 == 1 { 1i32 } else { -1 };
        let mut e = 0i32;
        let mut m = 0i32;
        for i in 0..side {
            for j in 0..side {
                let s = spin(i, j);
                e -= s * (spin(i + 1, j) + spin(i, j + 1));
                m += s;
            }
        }
        let w = (-(f64::from(e) - e0) / temperature).exp();
        z += w;
        zm += w * f64::from(m.abs()) / n as f64;
    }
    zm / z
}

/// Random spin lattice.
pub fn random_lattice(side: usize, r: &mut impl Rng) -> Array2<i8> {
    Array2::from_shape_fn((side, side), |_| if r.random::<bool>() { 1 } else { -1 })
}

/// Central finite-difference gradient of `f` at `x` with step `h`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Sample mean and (population) variance of each column.
pub fn column_moments(x: &Array2<f64>) -> Vec<(f64, f64)> {
    let n = x.nrows() as f64;
    (0..x.ncols())
        .map(|c| {
            let col = x.column(c);
            let m = col.sum() / n;
            (m, col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n)
        })
        .collect()
}
