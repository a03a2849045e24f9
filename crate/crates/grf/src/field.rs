//! Field realisations on regular grids, with flat-binary and CSV export.
//!
//! Binary layout (little endian): `u32 d`, `u32 size` per axis, `f64 alpha`,
//! `u64 seed`, `u64 stream`, then the row-major `f64` payload.

use ndarray::ArrayD;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{GrfError, Result};
use crate::rng::RngStream;

/// Grid convention of a realisation: DNA fields live on the closed grid
/// `x_j = j alpha / n` (n+1 points per axis), periodic and circulant fields
/// on the half-open uniform grid over one period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Closed,
    HalfOpen,
}

#[derive(Debug, Clone)]
pub struct FieldRealisation {
    pub values: ArrayD<f64>,
    pub alpha: f64,
    pub grid: GridKind,
    pub stream: RngStream,
}

impl FieldRealisation {
    pub fn dim(&self) -> usize {
        self.values.ndim()
    }

    /// Grid spacing along one axis.
    pub fn spacing(&self) -> f64 {
        let n = self.values.shape()[0];
        match self.grid {
            GridKind::Closed => self.alpha / (n as f64 - 1.0),
            GridKind::HalfOpen => self.alpha / n as f64,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        let shape = self.values.shape();
        w.write_all(&(shape.len() as u32).to_le_bytes())?;
        for &s in shape {
            w.write_all(&(s as u32).to_le_bytes())?;
        }
        w.write_all(&self.alpha.to_le_bytes())?;
        w.write_all(&self.stream.seed.to_le_bytes())?;
        w.write_all(&self.stream.stream.to_le_bytes())?;
        for v in self.values.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(path: &Path, grid: GridKind) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut u32buf = [0u8; 4];
        let mut u64buf = [0u8; 8];
        r.read_exact(&mut u32buf)?;
        let d = u32::from_le_bytes(u32buf) as usize;
        if !(1..=3).contains(&d) {
            return Err(GrfError::Format(format!("field file dimension {d} out of range")));
        }
        let mut shape = Vec::with_capacity(d);
        for _ in 0..d {
            r.read_exact(&mut u32buf)?;
            shape.push(u32::from_le_bytes(u32buf) as usize);
        }
        r.read_exact(&mut u64buf)?;
        let alpha = f64::from_le_bytes(u64buf);
        r.read_exact(&mut u64buf)?;
        let seed = u64::from_le_bytes(u64buf);
        r.read_exact(&mut u64buf)?;
        let stream = u64::from_le_bytes(u64buf);
        let len = shape.iter().product();
        let mut payload = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut u64buf)?;
            payload.push(f64::from_le_bytes(u64buf));
        }
        let values = ArrayD::from_shape_vec(ndarray::IxDyn(&shape), payload)
            .map_err(|e| GrfError::Format(e.to_string()))?;
        Ok(Self { values, alpha, grid, stream: RngStream::new(seed, stream) })
    }

    /// CSV export, one-dimensional fields only: header `x,value`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if self.dim() != 1 {
            return Err(GrfError::Unsupported("CSV export is for d = 1 fields".into()));
        }
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "x,value")?;
        let h = self.spacing();
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", i as f64 * h, v)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::IxDyn;

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.bin");
        let mut values = ArrayD::zeros(IxDyn(&[3, 4]));
        for (i, v) in values.iter_mut().enumerate() {
            *v = i as f64 * 0.5 - 1.0;
        }
        let field = FieldRealisation {
            values: values.clone(),
            alpha: 2.5,
            grid: GridKind::Closed,
            stream: RngStream::new(11, 22),
        };
        field.write_binary(&path).unwrap();
        let back = FieldRealisation::read_binary(&path, GridKind::Closed).unwrap();
        assert_eq!(back.values, values);
        assert_eq!(back.alpha, 2.5);
        assert_eq!(back.stream, RngStream::new(11, 22));
    }

    #[test]
    fn csv_export_d1_only() {
        let dir = tempfile::tempdir().unwrap();
        let field = FieldRealisation {
            values: ArrayD::zeros(IxDyn(&[2, 2])),
            alpha: 1.0,
            grid: GridKind::Closed,
            stream: RngStream::new(0, 0),
        };
        assert!(field.write_csv(&dir.path().join("x.csv")).is_err());
    }
}
