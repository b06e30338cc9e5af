//! Dense reference solver for small inpainting problems.
//!
//! Everything here is assembled explicitly from the stencil definition and
//! shares no code with the matrix-free CG path, so the two can check each
//! other.

use crate::error::{Error, Result};
use crate::image::{Image, Mask};

/// Largest grid (in pixels) the dense oracle will assemble.
pub const ORACLE_MAX_PIXELS: usize = 4096;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// The full `n × n` five-point Laplacian with mirrored boundary neighbours.
pub fn assemble_laplacian(width: usize, height: usize) -> DenseMatrix {
    let n = width * height;
    let mut a = DenseMatrix::zeros(n);
    let (w, h) = (width as isize, height as isize);
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            a.add(i, i, -4.0);
            for (dx, dy) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                let (nx, ny) = (x + dx, y + dy);
                // out-of-range neighbours reflect onto the centre pixel
                let j = if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    i
                } else {
                    (ny * w + nx) as usize
                };
                a.add(i, j, 1.0);
            }
        }
    }
    a
}

/// The reduced system `-A_UU u_U = A_UK f_K` for one mask.
#[derive(Debug, Clone)]
pub struct ReducedDense {
    /// Pixel indices of the unknowns, in raster order.
    pub unknown: Vec<usize>,
    /// `-A_UU`.
    pub matrix: DenseMatrix,
    laplacian: DenseMatrix,
    known: Vec<usize>,
}

impl ReducedDense {
    pub fn rhs(&self, plane: &[f64]) -> Vec<f64> {
        self.unknown
            .iter()
            .map(|&i| {
                self.known
                    .iter()
                    .map(|&j| self.laplacian.get(i, j) * plane[j])
                    .sum()
            })
            .collect()
    }
}

/// Assembles the reduced system from the full dense Laplacian.
pub fn assemble_reduced(mask: &Mask) -> Result<ReducedDense> {
    let n = mask.len();
    if n > ORACLE_MAX_PIXELS {
        return Err(Error::Config(format!(
            "dense oracle is limited to {ORACLE_MAX_PIXELS} pixels, got {n}"
        )));
    }
    let laplacian = assemble_laplacian(mask.width(), mask.height());
    let unknown = mask.unknown_indices();
    let known = mask.known_indices();
    let m = unknown.len();
    let mut matrix = DenseMatrix::zeros(m);
    for (r, &i) in unknown.iter().enumerate() {
        for (c, &j) in unknown.iter().enumerate() {
            matrix.data[r * m + c] = -laplacian.get(i, j);
        }
    }
    Ok(ReducedDense {
        unknown,
        matrix,
        laplacian,
        known,
    })
}

/// Solves `matrix · x = rhs` by Gaussian elimination without pivoting.
///
/// Intended for symmetric positive definite systems, where elimination
/// without pivoting is stable. Work is restricted to the matrix bandwidth
/// measured from the assembled entries.
pub fn gaussian_elimination(matrix: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = matrix.n;
    let mut a = matrix.data.clone();
    let mut b = rhs.to_vec();
    let mut band = 0;
    for i in 0..n {
        for j in 0..n {
            if a[i * n + j] != 0.0 {
                band = band.max(i.abs_diff(j));
            }
        }
    }
    for k in 0..n {
        let pivot = a[k * n + k];
        if pivot.abs() < 1e-300 {
            return Err(Error::Singular(format!("zero pivot in row {k}")));
        }
        let end = n.min(k + band + 1);
        for i in k + 1..end {
            let factor = a[i * n + k] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in k..end {
                a[i * n + j] -= factor * a[k * n + j];
            }
            b[i] -= factor * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let end = n.min(k + band + 1);
        let s: f64 = (k + 1..end).map(|j| a[k * n + j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k * n + k];
    }
    Ok(x)
}

/// Inpaints by assembling and directly solving the reduced dense system.
pub fn dense_solve_oracle(f: &Image, mask: &Mask) -> Result<Image> {
    f.ensure_mask(mask)?;
    if mask.count() == 0 {
        return Err(Error::Singular("mask has no known pixels".into()));
    }
    let system = assemble_reduced(mask)?;
    let mut planes = Vec::with_capacity(f.channels());
    for c in 0..f.channels() {
        let plane = f.channel(c);
        let x = gaussian_elimination(&system.matrix, &system.rhs(plane))?;
        let mut out = plane.to_vec();
        for (&i, v) in system.unknown.iter().zip(x) {
            out[i] = v.clamp(0.0, 1.0);
        }
        planes.push(out);
    }
    Image::from_planes(f.width(), f.height(), planes)
}
