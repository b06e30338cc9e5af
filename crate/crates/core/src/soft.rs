//! Analytic masks and soft-mask utilities.
//!
//! The analytic approach places known data with a local density that grows
//! with the Laplacian magnitude of the image. [`rescale_to_density`] turns
//! `|Δ luma|` into a soft mask with the requested mean, and
//! [`floyd_steinberg`] dithers it into a binary mask.

use crate::error::{Error, Result};
use crate::image::{to_luma, Image, Mask, SoftMask};
use crate::laplacian::apply_laplacian;

/// Per-pixel `|Δ u|` of a single-channel image.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl LaplacianMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::mismatch(width * height, values.len()));
        }
        if values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidValue(
                "Laplacian magnitudes must be finite and non-negative".into(),
            ));
        }
        Ok(LaplacianMap {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `|Δ luma|` with the same stencil and boundary rule as the solver.
pub fn laplacian_magnitude(luma: &Image) -> Result<LaplacianMap> {
    if luma.channels() != 1 {
        return Err(Error::InvalidValue(format!(
            "expected a single-channel image, got {} channels",
            luma.channels()
        )));
    }
    let values = apply_laplacian(luma.width(), luma.height(), luma.data())
        .into_iter()
        .map(f64::abs)
        .collect();
    Ok(LaplacianMap {
        width: luma.width(),
        height: luma.height(),
        values,
    })
}

fn check_density(d: f64) -> Result<()> {
    if d > 0.0 && d < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "density must lie in (0, 1), got {d}"
        )))
    }
}

fn clipped_mean(values: &[f64], scale: f64) -> f64 {
    values.iter().map(|v| (scale * v).min(1.0)).sum::<f64>() / values.len() as f64
}

/// Rescales a magnitude map into a soft mask with mean `d`.
///
/// Values become `min(1, λ·m)` with `λ` found by bisection. When too few
/// pixels are non-zero for that to reach `d`, the non-zero pixels saturate
/// at 1 and every zero pixel is lifted to a common base value instead. An
/// all-zero map yields the uniform soft mask `d`.
pub fn rescale_to_density(map: &LaplacianMap, d: f64) -> Result<SoftMask> {
    check_density(d)?;
    let (w, h) = (map.width, map.height);
    let n = map.values.len();
    let sum: f64 = map.values.iter().sum();
    if sum == 0.0 {
        return SoftMask::uniform(w, h, d);
    }
    let nonzero = map.values.iter().filter(|&&v| v > 0.0).count();
    let target = d * n as f64;

    if nonzero as f64 <= target {
        let base = (target - nonzero as f64) / (n - nonzero) as f64;
        let values = map
            .values
            .iter()
            .map(|&v| if v > 0.0 { 1.0 } else { base })
            .collect();
        return Ok(SoftMask::from_values_unchecked(w, h, values));
    }

    // mean(min(1, λm)) is continuous and non-decreasing in λ
    let mut lo = target / sum;
    let mut hi = lo;
    while clipped_mean(&map.values, hi) < d {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if clipped_mean(&map.values, mid) < d {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // on a fixed clipped set the mean is linear in λ; solve it exactly
    let mut lambda = hi;
    let (clipped, free_sum) = map.values.iter().fold((0usize, 0.0), |(c, s), &v| {
        if hi * v >= 1.0 {
            (c + 1, s)
        } else {
            (c, s + v)
        }
    });
    if free_sum > 0.0 {
        let exact = (target - clipped as f64) / free_sum;
        let consistent = map
            .values
            .iter()
            .all(|&v| (hi * v >= 1.0) == (exact * v >= 1.0));
        if consistent && exact > 0.0 {
            lambda = exact;
        }
    }
    let values = map.values.iter().map(|&v| (lambda * v).min(1.0)).collect();
    Ok(SoftMask::from_values_unchecked(w, h, values))
}

/// Floyd–Steinberg error diffusion in raster order.
///
/// A pixel becomes known when its accumulated value reaches 0.5. Error is
/// pushed 7/16 right, 3/16 below-left, 5/16 below and 1/16 below-right;
/// shares that would leave the image are dropped.
pub fn floyd_steinberg(s: &SoftMask) -> Mask {
    let (w, h) = (s.width(), s.height());
    let mut current: Vec<f64> = s.values()[..w].to_vec();
    let mut next = vec![0.0; w];
    let mut bits = Vec::with_capacity(w * h);
    for y in 0..h {
        if y + 1 < h {
            next.copy_from_slice(&s.values()[(y + 1) * w..(y + 2) * w]);
        }
        for x in 0..w {
            let v = current[x];
            let known = v >= 0.5;
            bits.push(known);
            let err = v - if known { 1.0 } else { 0.0 };
            if x + 1 < w {
                current[x + 1] += err * 7.0 / 16.0;
            }
            if y + 1 < h {
                if x > 0 {
                    next[x - 1] += err * 3.0 / 16.0;
                }
                next[x] += err * 5.0 / 16.0;
                if x + 1 < w {
                    next[x + 1] += err / 16.0;
                }
            }
        }
        std::mem::swap(&mut current, &mut next);
    }
    Mask::new(w, h, bits).expect("dimensions come from a valid soft mask")
}

/// Worst-case `|#known − Σ s|` for [`floyd_steinberg`] on a `width × height`
/// grid: every quantisation error is at most 1/2, and the dropped shares are
/// 11/16 per row at the side edges and 9/16 per pixel of the last row.
pub fn floyd_steinberg_mass_bound(width: usize, height: usize) -> f64 {
    0.5 * (11.0 / 16.0 * (height - 1) as f64 + 9.0 / 16.0 * (width - 1) as f64 + 1.0)
}

/// Rounds a soft mask; values of exactly 0.5 become known.
pub fn binarise_round(s: &SoftMask) -> Mask {
    let bits = s.values().iter().map(|&v| v >= 0.5).collect();
    Mask::new(s.width(), s.height(), bits).expect("dimensions come from a valid soft mask")
}

/// Scales `s` down to mean `d` if its mean exceeds `d`.
pub fn rescale_if_exceeds(s: &SoftMask, d: f64) -> Result<SoftMask> {
    if !(d > 0.0 && d <= 1.0) {
        return Err(Error::Config(format!(
            "density must lie in (0, 1], got {d}"
        )));
    }
    let mean = s.mean();
    if mean <= d {
        return Ok(s.clone());
    }
    let k = d / mean;
    let values = s.values().iter().map(|&v| (v * k).min(1.0)).collect();
    Ok(SoftMask::from_values_unchecked(
        s.width(),
        s.height(),
        values,
    ))
}

/// Weights of the inverse-variance mask penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceLossParams {
    pub alpha: f64,
    pub epsilon: f64,
}

impl Default for VarianceLossParams {
    fn default() -> Self {
        VarianceLossParams {
            alpha: 0.01,
            epsilon: 1e-8,
        }
    }
}

/// `α / (σ² + ε)` with `σ²` the population variance of the mask values.
pub fn variance_loss(s: &SoftMask, params: &VarianceLossParams) -> Result<f64> {
    if params.alpha.is_nan()
        || params.alpha < 0.0
        || params.epsilon.is_nan()
        || params.epsilon <= 0.0
    {
        return Err(Error::Config(format!(
            "variance loss needs alpha >= 0 and epsilon > 0, got {params:?}"
        )));
    }
    let mean = s.mean();
    let var = s
        .values()
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / s.values().len() as f64;
    Ok(params.alpha / (var + params.epsilon))
}

/// The analytic approach: dithered, rescaled Laplacian magnitude of the luma.
pub fn analytic_mask(f: &Image, d: f64) -> Result<Mask> {
    let map = laplacian_magnitude(&to_luma(f))?;
    Ok(floyd_steinberg(&rescale_to_density(&map, d)?))
}
