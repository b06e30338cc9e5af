//! Raster value types: planar images, binary masks and soft masks.
//!
//! All intensities live in `[0, 1]`. Conversion to and from 8-bit samples
//! happens only in [`crate::pnm`].

use crate::error::{Error, Result};
use crate::layout::PatchRect;

/// Rec. 601 luma weights for R, G, B.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// A planar image with one or three channels.
///
/// Samples are stored channel by channel, each channel in row-major order:
/// the value of channel `c` at `(x, y)` lives at `c * width * height + y * width + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidValue(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidValue(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::mismatch(
                format!("{expected} samples"),
                format!("{} samples", data.len()),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidValue(format!(
                "sample {pos} = {} lies outside [0, 1]",
                data[pos]
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    /// An image filled with a single value.
    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(
            width,
            height,
            channels,
            vec![value; width * height * channels],
        )
    }

    /// Builds a single-channel image from a function of `(x, y)`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, 1, data)
    }

    /// Assembles an image from separate channel planes.
    pub fn from_planes(width: usize, height: usize, planes: Vec<Vec<f64>>) -> Result<Self> {
        let channels = planes.len();
        let data = planes.into_iter().flatten().collect();
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of pixels per channel.
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.pixel_count();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.data[c * self.pixel_count() + y * self.width + x]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn ensure_same_shape(&self, other: &Image) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::mismatch(self.shape_string(), other.shape_string()))
        }
    }

    pub(crate) fn ensure_mask(&self, mask: &Mask) -> Result<()> {
        if self.width == mask.width() && self.height == mask.height() {
            Ok(())
        } else {
            Err(Error::mismatch(
                format!("{}x{} mask", self.width, self.height),
                format!("{}x{} mask", mask.width(), mask.height()),
            ))
        }
    }

    fn shape_string(&self) -> String {
        format!("{}x{}x{}", self.width, self.height, self.channels)
    }

    /// Copies the pixels inside `rect` into a new image.
    pub fn crop(&self, rect: &PatchRect) -> Image {
        let mut data = Vec::with_capacity(rect.area() * self.channels);
        for c in 0..self.channels {
            let plane = self.channel(c);
            for y in rect.y..rect.y + rect.height {
                let row = y * self.width;
                data.extend_from_slice(&plane[row + rect.x..row + rect.x + rect.width]);
            }
        }
        Image {
            width: rect.width,
            height: rect.height,
            channels: self.channels,
            data,
        }
    }
}

/// Converts an RGB image to its luma channel; grey images pass through unchanged.
pub fn to_luma(img: &Image) -> Image {
    if img.channels() == 1 {
        return img.clone();
    }
    let (r, g, b) = (img.channel(0), img.channel(1), img.channel(2));
    let data = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| {
            let y = LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b;
            // weights sum to 1 but rounding can step just outside [min, max]
            y.clamp(r.min(g).min(b), r.max(g).max(b))
        })
        .collect();
    Image {
        width: img.width(),
        height: img.height(),
        channels: 1,
        data,
    }
}

/// Binary known-data indicator; `true` marks a stored pixel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidValue(format!(
                "mask dimensions must be positive, got {width}x{height}"
            )));
        }
        if bits.len() != width * height {
            return Err(Error::mismatch(
                format!("{} bits", width * height),
                format!("{} bits", bits.len()),
            ));
        }
        Ok(Mask {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn full(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![true; width * height])
    }

    /// Builds a mask from the listed pixel indices.
    pub fn from_indices(width: usize, height: usize, known: &[usize]) -> Result<Self> {
        let mut bits = vec![false; width * height];
        for &i in known {
            if i >= bits.len() {
                return Err(Error::InvalidValue(format!("pixel index {i} out of range")));
            }
            bits[i] = true;
        }
        Self::new(width, height, bits)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, index: usize, known: bool) {
        self.bits[index] = known;
    }

    pub fn is_known(&self, index: usize) -> bool {
        self.bits[index]
    }

    /// Number of known pixels, `‖c‖₁`.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn density(&self) -> f64 {
        self.count() as f64 / self.bits.len() as f64
    }

    /// Indices of known pixels in raster order.
    pub fn known_indices(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&i| self.bits[i]).collect()
    }

    /// Indices of unknown pixels in raster order.
    pub fn unknown_indices(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&i| !self.bits[i]).collect()
    }

    /// Copies `tile` into this mask with its top-left corner at `rect.x, rect.y`.
    pub fn paste(&mut self, rect: &PatchRect, tile: &Mask) -> Result<()> {
        if tile.width != rect.width || tile.height != rect.height {
            return Err(Error::mismatch(
                format!("{}x{} tile", rect.width, rect.height),
                format!("{}x{} tile", tile.width, tile.height),
            ));
        }
        for y in 0..rect.height {
            let dst = (rect.y + y) * self.width + rect.x;
            let src = y * tile.width;
            self.bits[dst..dst + rect.width].copy_from_slice(&tile.bits[src..src + rect.width]);
        }
        Ok(())
    }

    /// Known-pixel count inside `rect`.
    pub fn count_in(&self, rect: &PatchRect) -> usize {
        (rect.y..rect.y + rect.height)
            .map(|y| {
                let row = y * self.width;
                self.bits[row + rect.x..row + rect.x + rect.width]
                    .iter()
                    .filter(|&&b| b)
                    .count()
            })
            .sum()
    }
}

/// Per-pixel confidence values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMask {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SoftMask {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidValue(format!(
                "soft mask dimensions must be positive, got {width}x{height}"
            )));
        }
        if values.len() != width * height {
            return Err(Error::mismatch(
                format!("{} values", width * height),
                format!("{} values", values.len()),
            ));
        }
        if let Some(pos) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidValue(format!(
                "soft mask value {pos} = {} lies outside [0, 1]",
                values[pos]
            )));
        }
        Ok(SoftMask {
            width,
            height,
            values,
        })
    }

    pub fn uniform(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub(crate) fn from_values_unchecked(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
        SoftMask {
            width,
            height,
            values,
        }
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

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// The soft mask as a grey image, e.g. for dumping as PGM.
    pub fn to_image(&self) -> Image {
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.values.clone(),
        }
    }
}

impl From<&Mask> for SoftMask {
    fn from(mask: &Mask) -> Self {
        SoftMask {
            width: mask.width,
            height: mask.height,
            values: mask
                .bits
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_and_bad_lengths() {
        assert!(Image::new(2, 1, 1, vec![0.0, 1.5]).is_err());
        assert!(Image::new(2, 1, 1, vec![0.0]).is_err());
        assert!(Image::new(0, 1, 1, vec![]).is_err());
        assert!(Image::new(1, 1, 2, vec![0.0, 0.0]).is_err());
        assert!(SoftMask::new(1, 1, vec![-0.1]).is_err());
        assert!(Mask::new(2, 2, vec![true; 3]).is_err());
    }

    #[test]
    fn luma_identity_on_grey() {
        let img = Image::new(2, 1, 1, vec![0.25, 0.75]).unwrap();
        assert_eq!(to_luma(&img), img);
    }

    #[test]
    fn luma_weights() {
        let img = Image::new(2, 1, 3, vec![1.0, 1.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let y = to_luma(&img);
        assert_eq!(y.channels(), 1);
        assert!((y.data()[0] - 1.0).abs() < 1e-15);
        assert!((y.data()[1] - 0.299).abs() < 1e-15);
    }

    #[test]
    fn mask_counts() {
        let m = Mask::from_indices(3, 2, &[0, 4]).unwrap();
        assert_eq!(m.count(), 2);
        assert!((m.density() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.known_indices(), vec![0, 4]);
        assert_eq!(m.unknown_indices(), vec![1, 2, 3, 5]);
        assert!(m.get(1, 1));
    }
}
