//! Output files: sample CSVs, tables and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use active_diffusion::format::format_float;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

/// Every file written into an output directory, with the command and
/// configuration hash that produced it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: BTreeMap<String, ManifestEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    /// Free-form description of how the file was produced.
    pub provenance: serde_json::Value,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Ok(Self::default());
        }
        serde_json::from_str(&fs::read_to_string(&path)?)
            .map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
    }

    /// Record `files` and rewrite the manifest.
    pub fn record(dir: &Path, files: &[String], entry: ManifestEntry) -> Result<(), CliError> {
        let mut m = Self::load(dir)?;
        for f in files {
            m.files.insert(f.clone(), entry.clone());
        }
        let text = serde_json::to_string_pretty(&m).map_err(|e| CliError::Other(e.to_string()))?;
        fs::write(dir.join(MANIFEST), text + "\n")?;
        Ok(())
    }
}

/// A table of named columns written as CSV with fixed float formatting.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut out = Vec::new();
    writeln!(out, "{}", header.join(","))?;
    for r in rows {
        writeln!(out, "{}", r.join(","))?;
    }
    fs::write(path, out)?;
    Ok(())
}

/// Sample matrix with columns `x0..x{d-1}` (and `eta0..` when given).
pub fn write_samples(path: &Path, x: &Array2<f64>, eta: Option<&Array2<f64>>) -> Result<(), CliError> {
    let d = x.ncols();
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    if eta.is_some() {
        header.extend((0..d).map(|i| format!("eta{i}")));
    }
    let mut out = Vec::with_capacity(x.len() * 12);
    writeln!(out, "{}", header.join(","))?;
    for r in 0..x.nrows() {
        let mut fields: Vec<String> = x.row(r).iter().map(|&v| format_float(v)).collect();
        if let Some(e) = eta {
            fields.extend(e.row(r).iter().map(|&v| format_float(v)));
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a sample CSV written by [`write_samples`] (only the `x` columns).
pub fn read_samples(path: &Path) -> Result<Array2<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
    parse_samples(&text).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

/// Parses sample CSV text, keeping the columns whose header starts with `x`.
pub fn parse_samples(text: &str) -> Result<Array2<f64>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    let cols: Vec<usize> = header
        .split(',')
        .enumerate()
        .filter(|(_, h)| h.trim().starts_with('x'))
        .map(|(i, _)| i)
        .collect();
    if cols.is_empty() {
        return Err("no x columns in header".into());
    }
    let mut data = Vec::new();
    let mut n = 0;
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        for &c in &cols {
            let v: f64 = fields
                .get(c)
                .and_then(|f| f.trim().parse().ok())
                .ok_or_else(|| format!("line {}: bad value in column {c}", idx + 2))?;
            data.push(v);
        }
        n += 1;
    }
    Array2::from_shape_vec((n, cols.len()), data).map_err(|e| e.to_string())
}

pub fn f(v: f64) -> String {
    format_float(v)
}
