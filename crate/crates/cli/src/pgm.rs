//! Minimal binary PGM (P5) writing.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

/// Writes an 8-bit binary PGM. `pixels` is row-major, `w * h` bytes.
pub fn write_pgm(path: &Path, w: u32, h: u32, pixels: &[u8]) -> Result<()> {
    assert_eq!(pixels.len(), (w as usize) * (h as usize));
    let mut buf = Vec::with_capacity(pixels.len() + 32);
    write!(buf, "P5\n{w} {h}\n255\n")?;
    buf.extend_from_slice(pixels);
    std::fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Maps per-cell values to bytes: `[min, max]` of the present values goes
/// linearly to `[0, 255]`; absent cells and flat maps render as 0.
pub fn quantize(values: &[Option<f64>]) -> Vec<u8> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in values.iter().flatten() {
        min = min.min(*v);
        max = max.max(*v);
    }
    let span = max - min;
    values
        .iter()
        .map(|v| match v {
            Some(v) if span > 0.0 => ((v - min) / span * 255.0).round() as u8,
            _ => 0,
        })
        .collect()
}
