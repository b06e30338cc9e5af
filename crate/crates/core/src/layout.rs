//! Rectangular patch tilings of an image.

use crate::error::{Error, Result};

/// Default patch side length in pixels.
pub const DEFAULT_PATCH_SIZE: usize = 120;

/// Smallest admissible nominal patch size.
pub const MIN_PATCH_SIZE: usize = 8;

/// One tile of a [`PatchLayout`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchRect {
    pub row: usize,
    pub col: usize,
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl PatchRect {
    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.width && y >= self.y && y < self.y + self.height
    }
}

/// An exact tiling of a `width × height` image into patches.
///
/// Interior patches are `patch_size` square; the last column and row absorb
/// the remainder and may be narrower. Patches are stored row-major, so the
/// patch at grid position `(row, col)` has index `row * grid_cols + col`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchLayout {
    width: usize,
    height: usize,
    patch_size: usize,
    grid_cols: usize,
    grid_rows: usize,
    patches: Vec<PatchRect>,
}

impl PatchLayout {
    pub fn new(width: usize, height: usize, patch_size: usize) -> Result<Self> {
        if patch_size < MIN_PATCH_SIZE {
            return Err(Error::Config(format!(
                "patch size {patch_size} is below the minimum of {MIN_PATCH_SIZE}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::Config(format!(
                "cannot tile an empty {width}x{height} image"
            )));
        }
        let grid_cols = width.div_ceil(patch_size);
        let grid_rows = height.div_ceil(patch_size);
        let mut patches = Vec::with_capacity(grid_cols * grid_rows);
        for row in 0..grid_rows {
            let y = row * patch_size;
            let h = patch_size.min(height - y);
            for col in 0..grid_cols {
                let x = col * patch_size;
                let w = patch_size.min(width - x);
                patches.push(PatchRect {
                    row,
                    col,
                    x,
                    y,
                    width: w,
                    height: h,
                });
            }
        }
        Ok(PatchLayout {
            width,
            height,
            patch_size,
            grid_cols,
            grid_rows,
            patches,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn grid_cols(&self) -> usize {
        self.grid_cols
    }

    pub fn grid_rows(&self) -> usize {
        self.grid_rows
    }

    pub fn patches(&self) -> &[PatchRect] {
        &self.patches
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// Index of the patch covering pixel `(x, y)`.
    pub fn patch_of(&self, x: usize, y: usize) -> usize {
        (y / self.patch_size) * self.grid_cols + x / self.patch_size
    }

    /// Area-weighted mean of one value per patch.
    pub fn area_weighted_mean(&self, values: &[f64]) -> f64 {
        let total: f64 = self
            .patches
            .iter()
            .zip(values)
            .map(|(p, v)| p.area() as f64 * v)
            .sum();
        total / (self.width * self.height) as f64
    }
}

/// Tiles a `width × height` image with patches of nominal side `patch_size`.
pub fn make_layout(width: usize, height: usize, patch_size: usize) -> Result<PatchLayout> {
    PatchLayout::new(width, height, patch_size)
}
