//! Target distributions: Gaussian diamonds, Swiss rolls, Ising lattices and
//! externally supplied 2D samples.

mod csv2d;
mod diamond;
mod ising;
mod lattice_io;
mod swiss_roll;

pub use csv2d::{ingest_csv_2d, parse_csv_2d, write_csv_2d, Dataset2D, Normalization};
pub use diamond::diamond_mixture;
pub use ising::{ising_ensemble, ising_mcmc, magnetization, IsingLattice};
pub use lattice_io::{
    discretize_spins, format_lattice, parse_lattice, parse_lattice_manifest, read_lattice_dir, write_lattice_dir,
    LatticeManifestEntry, LATTICE_MANIFEST,
};
pub use swiss_roll::{swiss_roll, SwissRollVariant, SWISS_ROLL};
