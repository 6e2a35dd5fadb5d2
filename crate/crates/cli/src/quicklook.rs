//! 8-bit magnitude previews as binary PGM.

use std::path::Path;

use anyhow::{bail, Result};

use sarpose::ComplexImage;

/// Grey level of each pixel: dB relative to the peak, clipped to
/// `[-dynamic_range_db, 0]` and mapped linearly onto `0..=255`. A zero image
/// is all black.
pub fn grey_levels(img: &ComplexImage, dynamic_range_db: f64) -> Result<Vec<u8>> {
    if !(dynamic_range_db > 0.0) {
        bail!("dynamic range must be positive");
    }
    let peak = img.data().iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(img
        .data()
        .iter()
        .map(|z| {
            if peak == 0.0 || z.norm() == 0.0 {
                return 0;
            }
            let db = (20.0 * (z.norm() / peak).log10()).max(-dynamic_range_db);
            (255.0 * (db + dynamic_range_db) / dynamic_range_db).round() as u8
        })
        .collect())
}

pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn write_quicklook(img: &ComplexImage, dynamic_range_db: f64, path: &Path) -> Result<()> {
    let px = grey_levels(img, dynamic_range_db)?;
    std::fs::write(path, encode_pgm(img.cols(), img.rows(), &px))?;
    Ok(())
}
