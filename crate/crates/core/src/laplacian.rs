//! Five-point Laplacian with reflecting boundaries, grid spacing 1.
//!
//! A neighbour outside the image is mirrored onto the centre pixel, so it
//! contributes `u[i] - u[i] = 0`. The operator therefore reduces to
//! `Σ_{in-range j} (u[j] - u[i])`, which annihilates constants and is
//! symmetric.

/// Returns the in-range 4-neighbours of pixel `i` on a `width × height` grid.
#[inline]
pub(crate) fn neighbours(width: usize, height: usize, i: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (i % width, i / width);
    let left = (x > 0).then(|| i - 1);
    let right = (x + 1 < width).then(|| i + 1);
    let up = (y > 0).then(|| i - width);
    let down = (y + 1 < height).then(|| i + width);
    [left, right, up, down].into_iter().flatten()
}

/// Applies the discrete Laplacian to one plane of `width × height` samples.
pub fn apply_laplacian(width: usize, height: usize, u: &[f64]) -> Vec<f64> {
    assert_eq!(u.len(), width * height, "plane length does not match grid");
    let mut out = vec![0.0; u.len()];
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            let c = u[i];
            let mut acc = 0.0;
            if x > 0 {
                acc += u[i - 1] - c;
            }
            if x + 1 < width {
                acc += u[i + 1] - c;
            }
            if y > 0 {
                acc += u[i - width] - c;
            }
            if y + 1 < height {
                acc += u[i + width] - c;
            }
            out[i] = acc;
        }
    }
    out
}
