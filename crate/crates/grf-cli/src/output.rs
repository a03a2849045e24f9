//! Output helpers: manifests, CSV writing, NetPBM heatmaps.

use ndarray::ArrayD;
use std::io::Write;
use std::path::Path;

/// Writes a `key: value` manifest recording everything needed to re-run
/// the command.
pub fn write_manifest(path: &Path, entries: &[(&str, String)]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (key, value) in entries {
        writeln!(w, "{key}: {value}")?;
    }
    Ok(())
}

/// Writes a CSV file from a header and rows of already-formatted fields.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// 8-bit P5 (binary greyscale NetPBM) heatmap of a 2-D array, linearly
/// scaled between the array min and max.
pub fn write_pgm(path: &Path, data: &ArrayD<f64>) -> std::io::Result<()> {
    assert_eq!(data.ndim(), 2, "heatmaps are 2-D");
    let (rows, cols) = (data.shape()[0], data.shape()[1]);
    let min = data.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if max > min { max - min } else { 1.0 };
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(w, "P5\n{cols} {rows}\n255\n")?;
    let mut bytes = Vec::with_capacity(rows * cols);
    for v in data.iter() {
        let level = ((v - min) / span * 255.0).round().clamp(0.0, 255.0) as u8;
        bytes.push(level);
    }
    w.write_all(&bytes)?;
    Ok(())
}

/// Compact float formatting with full round-trip precision.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.17e}")
}
