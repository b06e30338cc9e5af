//! Reconstruction quality on the 8-bit scale.

use crate::error::{Error, Result};
use crate::image::Image;

/// Peak value for PSNR.
pub const PEAK: f64 = 255.0;

/// Mean over all pixels and channels of `(255·u − 255·f)²`.
pub fn metric_mse(u: &Image, f: &Image) -> Result<f64> {
    u.ensure_same_shape(f)?;
    let sum: f64 = u
        .data()
        .iter()
        .zip(f.data())
        .map(|(a, b)| {
            let d = PEAK * a - PEAK * b;
            d * d
        })
        .sum();
    Ok(sum / u.data().len() as f64)
}

/// `10·log10(255² / mse)` in dB; zero error gives `f64::INFINITY`.
pub fn metric_psnr(mse: f64) -> Result<f64> {
    if mse.is_nan() || mse < 0.0 {
        return Err(Error::InvalidValue(format!(
            "mse must be non-negative, got {mse}"
        )));
    }
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (PEAK * PEAK / mse).log10())
}

/// Formats a PSNR value, writing `inf` for lossless reconstructions.
pub fn format_psnr(psnr: f64) -> String {
    if psnr.is_infinite() {
        "inf".to_string()
    } else {
        format!("{psnr:.4}")
    }
}

/// Pearson correlation of two equally long samples.
///
/// Returns an error for length mismatches, fewer than two samples or a
/// sample with zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::mismatch(
            format!("{} samples", a.len()),
            format!("{} samples", b.len()),
        ));
    }
    if a.len() < 2 {
        return Err(Error::InvalidValue("correlation needs two samples".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::InvalidValue(
            "correlation of a constant sample".into(),
        ));
    }
    Ok(sab / (saa * sbb).sqrt())
}
