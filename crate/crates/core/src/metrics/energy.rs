//! Energy distance between two sample sets.

use ndarray::{ArrayView2, Axis};
use rand::seq::index::sample;

use crate::error::{ensure_dim, Error, Result};
use crate::rng;

/// Sets larger than this are subsampled (without replacement) before the
/// quadratic-cost evaluation.
pub const ENERGY_SUBSAMPLE: usize = 2000;

fn mean_pair_distance(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    let mut total = 0.0;
    for ra in a.rows() {
        let mut row = 0.0;
        for rb in b.rows() {
            let d2: f64 = ra.iter().zip(rb.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
            row += d2.sqrt();
        }
        total += row;
    }
    total / (a.nrows() * b.nrows()) as f64
}

fn subsample(x: ArrayView2<f64>, seed: u64) -> ndarray::Array2<f64> {
    if x.nrows() <= ENERGY_SUBSAMPLE {
        return x.to_owned();
    }
    let mut r = rng::stream(seed, 0);
    let mut idx = sample(&mut r, x.nrows(), ENERGY_SUBSAMPLE).into_vec();
    idx.sort_unstable();
    x.select(Axis(0), &idx)
}

/// `2 E|X - Y| - E|X - X'| - E|Y - Y'|` over all pairs (including the
/// zero self-pairs), which vanishes exactly for identical inputs. Sets
/// larger than [`ENERGY_SUBSAMPLE`] rows are subsampled with `seed`; both
/// sets use the same index draw when they have the same size.
pub fn energy_distance(a: ArrayView2<f64>, b: ArrayView2<f64>, seed: u64) -> Result<f64> {
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(Error::invalid("energy distance needs non-empty sample sets"));
    }
    ensure_dim(a.ncols(), b.ncols())?;
    let a = subsample(a, seed);
    let b = subsample(b, seed);
    let ab = mean_pair_distance(a.view(), b.view());
    let aa = mean_pair_distance(a.view(), a.view());
    let bb = mean_pair_distance(b.view(), b.view());
    Ok((2.0 * ab - aa - bb).max(0.0))
}
