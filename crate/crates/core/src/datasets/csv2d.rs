//! Two-column sample files.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::format_float;

/// Per-column affine map applied on ingest: `stored = (raw - shift) / scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub shift: [f64; 2],
    pub scale: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset2D {
    pub samples: Array2<f64>,
    pub provenance: String,
    pub normalization: Option<Normalization>,
}

impl Dataset2D {
    /// Map samples in stored units back to the original units.
    pub fn denormalize(&self, samples: &Array2<f64>) -> Result<Array2<f64>> {
        if samples.ncols() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: samples.ncols() });
        }
        let mut out = samples.clone();
        if let Some(n) = &self.normalization {
            for mut row in out.rows_mut() {
                for c in 0..2 {
                    row[c] = row[c] * n.scale[c] + n.shift[c];
                }
            }
        }
        Ok(out)
    }
}

/// Parse CSV text with a header row and exactly two numeric columns.
pub fn parse_csv_2d<R: Read>(reader: R) -> Result<Array2<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    if header.len() != 2 {
        return Err(Error::Parse { line: 1, message: format!("expected 2 columns, header has {}", header.len()) });
    }
    let mut data = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(Error::Parse { line, message: format!("expected 2 fields, found {}", rec.len()) });
        }
        for field in rec.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse { line, message: format!("not a number: {field:?}") })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, message: format!("non-finite value {field:?}") });
            }
            data.push(v);
        }
    }
    if data.is_empty() {
        return Err(Error::Parse { line: 1, message: "no data rows".into() });
    }
    let n = data.len() / 2;
    Array2::from_shape_vec((n, 2), data).map_err(|e| Error::invalid(e.to_string()))
}

/// Load a two-column CSV file, optionally standardizing each column to
/// zero mean and unit variance.
pub fn ingest_csv_2d(path: &Path, normalize: bool) -> Result<Dataset2D> {
    let mut samples = parse_csv_2d(std::fs::File::open(path)?)?;
    let normalization = if normalize {
        let n = samples.nrows() as f64;
        let mut shift = [0.0; 2];
        let mut scale = [1.0; 2];
        for c in 0..2 {
            let col = samples.column(c);
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            if !(var > 0.0) {
                return Err(Error::invalid(format!("column {c} is constant and cannot be standardized")));
            }
            shift[c] = mean;
            scale[c] = var.sqrt();
        }
        for mut row in samples.rows_mut() {
            for c in 0..2 {
                row[c] = (row[c] - shift[c]) / scale[c];
            }
        }
        Some(Normalization { shift, scale })
    } else {
        None
    };
    Ok(Dataset2D { samples, provenance: format!("csv:{}", path.display()), normalization })
}

/// Write samples with a `x0,x1` header using the fixed float format.
pub fn write_csv_2d<W: Write>(mut w: W, samples: &Array2<f64>) -> Result<()> {
    if samples.ncols() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: samples.ncols() });
    }
    writeln!(w, "x0,x1")?;
    for row in samples.rows() {
        writeln!(w, "{},{}", format_float(row[0]), format_float(row[1]))?;
    }
    Ok(())
}
