//! Text storage of spin lattices: one whitespace-separated grid of ±1 per
//! file plus a CSV manifest recording each file's temperature, seed and
//! chain.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::IsingLattice;
use crate::error::{Error, Result};

pub const LATTICE_MANIFEST: &str = "manifest.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeManifestEntry {
    pub file: String,
    pub temperature: f64,
    pub seed: u64,
    pub chain: u64,
}

/// Map continuous samples to spins by sign (zero maps to +1).
pub fn discretize_spins(x: &Array2<f64>) -> Array2<i8> {
    x.mapv(|v| if v < 0.0 { -1 } else { 1 })
}

pub fn format_lattice(spins: &Array2<i8>) -> String {
    let mut out = String::with_capacity(spins.len() * 3);
    for row in spins.rows() {
        let line: Vec<&str> = row.iter().map(|&s| if s > 0 { "1" } else { "-1" }).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Parse a square grid of `1`/`-1` tokens. Blank lines are ignored.
pub fn parse_lattice(text: &str) -> Result<Array2<i8>> {
    let mut data = Vec::new();
    let mut side = None;
    let mut rows = 0;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut count = 0;
        for tok in line.split_whitespace() {
            let s = match tok {
                "1" | "+1" => 1,
                "-1" => -1,
                _ => return Err(Error::Parse { line: idx + 1, message: format!("expected 1 or -1, found {tok:?}") }),
            };
            data.push(s);
            count += 1;
        }
        match side {
            None => side = Some(count),
            Some(n) if n != count => {
                return Err(Error::Parse { line: idx + 1, message: format!("row has {count} spins, expected {n}") })
            }
            _ => {}
        }
        rows += 1;
    }
    let side = side.ok_or_else(|| Error::Parse { line: 0, message: "empty lattice".into() })?;
    if rows != side {
        return Err(Error::Parse { line: 0, message: format!("lattice has {rows} rows and {side} columns") });
    }
    Array2::from_shape_vec((side, side), data).map_err(|e| Error::invalid(e.to_string()))
}

pub fn parse_lattice_manifest(text: &str) -> Result<Vec<LatticeManifestEntry>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        let rec: LatticeManifestEntry = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        if rec.file.contains(['/', '\\']) || rec.file.starts_with('.') {
            return Err(Error::invalid(format!("manifest file name {:?} must be a plain name", rec.file)));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Write `lattice_{i:05}.txt` for every lattice plus the manifest.
pub fn write_lattice_dir(dir: &Path, lattices: &[IsingLattice]) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut names = Vec::with_capacity(lattices.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    for (i, lat) in lattices.iter().enumerate() {
        let name = format!("lattice_{i:05}.txt");
        fs::write(dir.join(&name), format_lattice(&lat.spins))?;
        w.serialize(LatticeManifestEntry {
            file: name.clone(),
            temperature: lat.temperature,
            seed: lat.seed,
            chain: lat.chain,
        })
        .map_err(|e| Error::invalid(e.to_string()))?;
        names.push(name);
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    fs::write(dir.join(LATTICE_MANIFEST), bytes)?;
    Ok(names)
}

/// Read every lattice listed in the directory's manifest.
pub fn read_lattice_dir(dir: &Path) -> Result<Vec<IsingLattice>> {
    let manifest = parse_lattice_manifest(&fs::read_to_string(dir.join(LATTICE_MANIFEST))?)?;
    manifest
        .into_iter()
        .map(|e| {
            let spins = parse_lattice(&fs::read_to_string(dir.join(&e.file))?)?;
            Ok(IsingLattice { spins, temperature: e.temperature, seed: e.seed, chain: e.chain })
        })
        .collect()
}
