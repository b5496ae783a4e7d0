//! Coarse-grained magnetization of spin lattices.
//!
//! For a filter size `l`, every lattice site anchors an `l × l` window
//! (wrapping periodically); the window mean of the spins is taken in
//! absolute value and averaged over sites, then over the ensemble. Window
//! sums are exact integers, so the result does not depend on summation
//! order within a lattice.

use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ConvolutionCurve {
    pub l_values: Vec<usize>,
    pub values: Vec<f64>,
    pub ensemble_size: usize,
}

/// Filter sizes `1..=L/2`.
pub fn default_filter_sizes(side: usize) -> Vec<usize> {
    (1..=side / 2).collect()
}

/// Largest absolute difference between two curves over their common `l`.
pub fn max_gap(a: &ConvolutionCurve, b: &ConvolutionCurve) -> Result<f64> {
    if a.l_values != b.l_values {
        return Err(Error::invalid("curves use different filter sizes"));
    }
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// Sum over anchors of `|window sum|` for one lattice.
fn abs_window_sum(spins: &Array2<i8>, l: usize) -> u64 {
    let side = spins.nrows();
    // Summed-area table of the periodically extended lattice.
    let ext = side + l;
    let mut sat = vec![0i64; (ext + 1) * (ext + 1)];
    for i in 0..ext {
        let mut row = 0i64;
        for j in 0..ext {
            row += i64::from(spins[[i % side, j % side]]);
            sat[(i + 1) * (ext + 1) + j + 1] = sat[i * (ext + 1) + j + 1] + row;
        }
    }
    let at = |i: usize, j: usize| sat[i * (ext + 1) + j];
    let mut total = 0u64;
    for i in 0..side {
        for j in 0..side {
            let s = at(i + l, j + l) - at(i, j + l) - at(i + l, j) + at(i, j);
            total += s.unsigned_abs();
        }
    }
    total
}

/// Ensemble-averaged coarse-grained `|magnetization|` for each filter size.
pub fn convolution_metric(lattices: &[Array2<i8>], l_values: &[usize]) -> Result<ConvolutionCurve> {
    let first = lattices.first().ok_or_else(|| Error::invalid("no lattices"))?;
    let side = first.nrows();
    for (k, lat) in lattices.iter().enumerate() {
        if lat.nrows() != side || lat.ncols() != side {
            return Err(Error::invalid(format!("lattice {k} is not {side}×{side}")));
        }
        if lat.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::invalid(format!("lattice {k} has entries other than ±1")));
        }
    }
    let mut values = Vec::with_capacity(l_values.len());
    for &l in l_values {
        if l == 0 || l > side {
            return Err(Error::invalid(format!("filter size {l} outside 1..={side}")));
        }
        let norm = (l * l * side * side) as f64;
        let sum: f64 = lattices.iter().map(|lat| abs_window_sum(lat, l) as f64 / norm).sum();
        values.push(sum / lattices.len() as f64);
    }
    Ok(ConvolutionCurve { l_values: l_values.to_vec(), values, ensemble_size: lattices.len() })
}
