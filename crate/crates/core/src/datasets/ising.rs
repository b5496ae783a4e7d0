//! Metropolis sampling of the zero-field 2D Ising model (`J = 1`, periodic
//! boundaries). One step is one attempted single-spin flip at a uniformly
//! chosen site.

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct IsingLattice {
    pub spins: Array2<i8>,
    pub temperature: f64,
    pub seed: u64,
    /// Index of the independent chain (its random stream).
    pub chain: u64,
}

/// Mean spin.
pub fn magnetization(spins: &Array2<i8>) -> f64 {
    spins.iter().map(|&s| f64::from(s)).sum::<f64>() / spins.len() as f64
}

fn check(side: usize, temperature: f64) -> Result<()> {
    if side < 2 {
        return Err(Error::invalid("Ising lattice side must be at least 2"));
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::invalid("Ising temperature must be positive and finite"));
    }
    Ok(())
}

/// Final configuration of chain `chain` after `steps` attempted flips,
/// started from independent uniform spins.
pub fn ising_mcmc(side: usize, temperature: f64, steps: u64, seed: u64, chain: u64) -> Result<IsingLattice> {
    check(side, temperature)?;
    let mut r = rng::stream(seed, chain);
    let n = side * side;
    let mut s: Vec<i8> = (0..n).map(|_| if r.random::<bool>() { 1 } else { -1 }).collect();
    // Acceptance probabilities for the only positive energy changes, 4 and 8.
    let accept = [(-4.0 / temperature).exp(), (-8.0 / temperature).exp()];
    for _ in 0..steps {
        let site = r.random_range(0..n);
        let (i, j) = (site / side, site % side);
        let up = ((i + side - 1) % side) * side + j;
        let down = ((i + 1) % side) * side + j;
        let left = i * side + (j + side - 1) % side;
        let right = i * side + (j + 1) % side;
        let field = i32::from(s[up]) + i32::from(s[down]) + i32::from(s[left]) + i32::from(s[right]);
        let de = 2 * i32::from(s[site]) * field;
        // Draw the uniform unconditionally so the stream position depends
        // only on the step count.
        let u: f64 = r.random();
        let flip = match de {
            d if d <= 0 => true,
            4 => u < accept[0],
            _ => u < accept[1],
        };
        if flip {
            s[site] = -s[site];
        }
    }
    let spins = Array2::from_shape_vec((side, side), s).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(IsingLattice { spins, temperature, seed, chain })
}

/// `count` independent chains (streams `0..count`), run in parallel.
pub fn ising_ensemble(side: usize, temperature: f64, steps: u64, count: usize, seed: u64) -> Result<Vec<IsingLattice>> {
    check(side, temperature)?;
    (0..count as u64).into_par_iter().map(|c| ising_mcmc(side, temperature, steps, seed, c)).collect()
}
