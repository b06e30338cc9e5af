//! Matrix-free homogeneous diffusion inpainting.
//!
//! For a binary mask the inpainting equation `(I - C) A u - C (u - f) = 0`
//! fixes `u = f` on known pixels. Eliminating those rows leaves the reduced
//! system `-A_UU u_U = A_UK f_K` on the unknown pixels `U`. With reflecting
//! boundaries and at least one known pixel, `-A_UU` is a symmetric positive
//! definite M-matrix, so conjugate gradients apply and the solution obeys a
//! discrete maximum principle.
//!
//! Each channel is solved independently.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::laplacian::{apply_laplacian, neighbours};
use crate::multigrid::{Multigrid, Workspace};

/// Stopping rule for the CG solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Stop once `‖r_k‖₂ ≤ tol · ‖b‖₂`. With the zero initial guess this is
    /// the relative decrease `‖r_k‖₂ / ‖r_0‖₂`.
    pub rel_residual_tol: f64,
    /// Iteration cap per channel; `None` means `10 × max(width, height)`.
    pub max_iterations: Option<usize>,
    pub preconditioner: Preconditioner,
}

/// Preconditioner used by [`inpaint`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    /// Plain conjugate gradients.
    None,
    /// One aggregation multigrid V-cycle per iteration. Needs far fewer
    /// iterations on large, sparse masks.
    #[default]
    Multigrid,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rel_residual_tol: 1e-6,
            max_iterations: None,
            preconditioner: Preconditioner::default(),
        }
    }
}

impl SolverConfig {
    pub fn with_tolerance(rel_residual_tol: f64) -> Self {
        SolverConfig {
            rel_residual_tol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rel_residual_tol.is_nan() || self.rel_residual_tol <= 0.0 {
            return Err(Error::Config(format!(
                "residual tolerance must be positive, got {}",
                self.rel_residual_tol
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }

    pub fn max_iterations_for(&self, width: usize, height: usize) -> usize {
        self.max_iterations.unwrap_or(10 * width.max(height)).max(1)
    }
}

/// Outcome of the solve for one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStats {
    pub iterations: usize,
    /// True residual of the returned solution relative to `‖b‖₂`.
    pub final_rel_residual: f64,
    pub converged: bool,
}

/// Per-channel CG diagnostics of one inpainting.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveStats {
    pub channels: Vec<ChannelStats>,
}

impl SolveStats {
    pub fn total_iterations(&self) -> usize {
        self.channels.iter().map(|c| c.iterations).sum()
    }

    pub fn max_iterations(&self) -> usize {
        self.channels
            .iter()
            .map(|c| c.iterations)
            .max()
            .unwrap_or(0)
    }

    pub fn final_rel_residual(&self) -> f64 {
        self.channels
            .iter()
            .map(|c| c.final_rel_residual)
            .fold(0.0, f64::max)
    }

    pub fn converged(&self) -> bool {
        self.channels.iter().all(|c| c.converged)
    }
}

/// Shape of the padded grid: one zero pixel on every side of the image.
///
/// Vectors on this grid are zero outside `U`, so the stencil needs no
/// boundary or mask branches: a neighbour that is known or out of range
/// simply contributes nothing.
#[derive(Debug, Clone, Copy)]
struct Grid {
    width: usize,
    height: usize,
    stride: usize,
}

impl Grid {
    fn new(width: usize, height: usize) -> Grid {
        Grid {
            width,
            height,
            stride: width + 2,
        }
    }

    fn len(&self) -> usize {
        self.stride * (self.height + 2)
    }

    fn padded(&self, i: usize) -> usize {
        (i / self.width + 1) * self.stride + i % self.width + 1
    }

    /// Start of interior row `y` in padded and unpadded storage.
    fn row(&self, y: usize) -> (usize, usize) {
        ((y + 1) * self.stride + 1, y * self.width)
    }

    /// Writes `-A_UU x` into the interior of `out`; the padding is untouched.
    fn apply(&self, indicator: &[f64], diag: &[f64], x: &[f64], out: &mut [f64]) {
        let (w, s) = (self.width, self.stride);
        for y in 0..self.height {
            let (at, _) = self.row(y);
            let centre = &x[at..at + w];
            let left = &x[at - 1..at - 1 + w];
            let right = &x[at + 1..at + 1 + w];
            let up = &x[at - s..at - s + w];
            let down = &x[at + s..at + s + w];
            let diag = &diag[at..at + w];
            let ind = &indicator[at..at + w];
            let out = &mut out[at..at + w];
            for k in 0..w {
                out[k] = diag[k] * centre[k] - ind[k] * (left[k] + right[k] + up[k] + down[k]);
            }
        }
    }

    /// Known-neighbour values moved to the right-hand side, with `plane`
    /// already padded.
    fn rhs(&self, indicator: &[f64], plane: &[f64], b: &mut [f64]) {
        let (w, s) = (self.width, self.stride);
        for y in 0..self.height {
            let (at, _) = self.row(y);
            let sum = |o: usize, k: usize| (1.0 - indicator[o + k]) * plane[o + k];
            let ind = &indicator[at..at + w];
            let b = &mut b[at..at + w];
            for k in 0..w {
                let o = at + k;
                b[k] = ind[k] * (sum(o, 1) + sum(o - 1, 0) + sum(o, s) + sum(o - s, 0));
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Work vectors of one CG solve.
#[derive(Default)]
struct CgBuffers {
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
}

impl CgBuffers {
    fn resize(&mut self, n: usize) {
        for v in [&mut self.r, &mut self.z, &mut self.p, &mut self.ap] {
            v.clear();
            v.resize(n, 0.0);
        }
    }
}

/// Conjugate gradients for a symmetric positive definite operator.
///
/// Iterates from the contents of `x` until `‖b - Ax‖₂ ≤ tol · ‖b‖₂` or
/// `max_iter` steps. The recursive residual is checked against the true one
/// on exit and the iteration restarts if they disagree about convergence.
/// Returns the iteration count and the true relative residual.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> (usize, f64) {
    preconditioned_conjugate_gradient(apply, |r, z| z.copy_from_slice(r), b, x, tol, max_iter)
}

/// [`conjugate_gradient`] with a symmetric positive definite preconditioner
/// `precondition(r, z)` that writes `z ≈ A⁻¹ r`.
///
/// The stopping rule is still measured on the unpreconditioned residual.
pub fn preconditioned_conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    precondition: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> (usize, f64) {
    let mut buffers = CgBuffers::default();
    pcg(apply, precondition, b, x, tol, max_iter, &mut buffers)
}

fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    mut precondition: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    buffers: &mut CgBuffers,
) -> (usize, f64) {
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.fill(0.0);
        return (0, 0.0);
    }
    buffers.resize(b.len());
    let CgBuffers { r, z, p, ap } = buffers;
    let threshold = tol * b_norm;
    let mut iterations = 0;

    loop {
        apply(x, ap);
        for ((r, b), ap) in r.iter_mut().zip(b).zip(ap.iter()) {
            *r = b - ap;
        }
        let rs = dot(r, r);
        if rs.sqrt() <= threshold || iterations >= max_iter {
            return (iterations, rs.sqrt() / b_norm);
        }
        precondition(r, z);
        p.copy_from_slice(z);
        let mut rz = dot(r, z);
        let restart_at = iterations;
        while iterations < max_iter && rz > 0.0 {
            apply(p, ap);
            let curvature = dot(p, ap);
            if curvature <= 0.0 {
                break;
            }
            let alpha = rz / curvature;
            let mut rs_new = 0.0;
            for (((x, r), p), ap) in x.iter_mut().zip(r.iter_mut()).zip(p.iter()).zip(ap.iter()) {
                *x += alpha * p;
                *r -= alpha * ap;
                rs_new += *r * *r;
            }
            iterations += 1;
            if rs_new.sqrt() <= threshold {
                break;
            }
            precondition(r, z);
            let rz_new = dot(r, z);
            let beta = rz_new / rz;
            for (p, z) in p.iter_mut().zip(z.iter()) {
                *p = z + beta * *p;
            }
            rz = rz_new;
        }
        if iterations == restart_at {
            // no descent possible from here
            apply(x, ap);
            let r2: f64 = b
                .iter()
                .zip(ap.iter())
                .map(|(b, a)| (b - a) * (b - a))
                .sum();
            return (iterations, r2.sqrt() / b_norm);
        }
    }
}

/// Inpaints `f` from the pixels selected by `mask`.
///
/// CG starts from zero, or from the known value when all known pixels of a
/// channel agree.
pub fn inpaint(f: &Image, mask: &Mask, cfg: &SolverConfig) -> Result<(Image, SolveStats)> {
    Inpainter::new(f, mask.clone(), cfg)?.solve(None)
}

/// Like [`inpaint`], but CG starts from `guess` on the unknown pixels.
///
/// The stopping rule is measured against `‖b‖₂`, so the accuracy of the
/// result does not depend on the guess.
pub fn inpaint_from(
    f: &Image,
    mask: &Mask,
    cfg: &SolverConfig,
    guess: &Image,
) -> Result<(Image, SolveStats)> {
    Inpainter::new(f, mask.clone(), cfg)?.solve(Some(guess))
}

/// Per-channel state kept between solves.
struct Channel {
    /// The channel of `f` on the padded grid.
    plane: Vec<f64>,
    b: Vec<f64>,
    x: Vec<f64>,
    cg: CgBuffers,
    multigrid: Option<Workspace>,
}

/// Repeated inpainting of one image under a mask that changes a few pixels
/// at a time.
///
/// Keeps the reduced system, the preconditioner hierarchy and all work
/// vectors between solves, and patches the hierarchy locally where the mask
/// changed. [`inpaint`] is a single solve with a fresh `Inpainter`.
///
/// ```
/// use maskopt::{inpaint, Image, Inpainter, Mask, SolverConfig};
///
/// let f = Image::from_fn(16, 16, |x, y| (x * y) as f64 / 225.0)?;
/// let mask = Mask::from_indices(16, 16, &[0, 15, 240, 255])?;
/// let cfg = SolverConfig::default();
/// let mut solver = Inpainter::new(&f, mask.clone(), &cfg)?;
/// solver.set_known(120, true);
/// let (u, _) = solver.solve(None)?;
///
/// let mut grown = mask;
/// grown.set(120, true);
/// let (v, _) = inpaint(&f, &grown, &cfg)?;
/// assert!(u.data().iter().zip(v.data()).all(|(a, b)| (a - b).abs() < 1e-5));
/// # Ok::<(), maskopt::Error>(())
/// ```
pub struct Inpainter<'a> {
    f: &'a Image,
    cfg: SolverConfig,
    mask: Mask,
    grid: Grid,
    /// 1 on unknowns, 0 elsewhere (padded).
    indicator: Vec<f64>,
    /// In-range neighbour count of every pixel (padded).
    degree: Vec<f64>,
    /// `degree` on unknowns, 0 elsewhere.
    diag: Vec<f64>,
    multigrid: Option<Multigrid>,
    /// Pixels changed since the hierarchy was last synchronised.
    changed: Vec<usize>,
    stale: bool,
    channels: Vec<Channel>,
}

impl<'a> Inpainter<'a> {
    pub fn new(f: &'a Image, mask: Mask, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        f.ensure_mask(&mask)?;
        let (width, height) = (f.width(), f.height());
        let grid = Grid::new(width, height);
        let mut degree = vec![0.0; grid.len()];
        let mut indicator = vec![0.0; grid.len()];
        for i in 0..width * height {
            let k = grid.padded(i);
            degree[k] = neighbours(width, height, i).count() as f64;
            indicator[k] = if mask.is_known(i) { 0.0 } else { 1.0 };
        }
        let diag = indicator.iter().zip(&degree).map(|(a, b)| a * b).collect();
        let channels = (0..f.channels())
            .map(|c| {
                let mut plane = vec![0.0; grid.len()];
                for (i, &v) in f.channel(c).iter().enumerate() {
                    plane[grid.padded(i)] = v;
                }
                Channel {
                    plane,
                    b: vec![0.0; grid.len()],
                    x: vec![0.0; grid.len()],
                    cg: CgBuffers::default(),
                    multigrid: None,
                }
            })
            .collect();
        Ok(Inpainter {
            f,
            cfg: *cfg,
            mask,
            grid,
            indicator,
            degree,
            diag,
            multigrid: None,
            changed: Vec::new(),
            stale: true,
            channels,
        })
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    /// Marks pixel `i` as known or unknown for the following solves.
    pub fn set_known(&mut self, i: usize, known: bool) {
        if self.mask.is_known(i) == known {
            return;
        }
        self.mask.set(i, known);
        let k = self.grid.padded(i);
        self.indicator[k] = if known { 0.0 } else { 1.0 };
        self.diag[k] = self.indicator[k] * self.degree[k];
        if !self.stale {
            self.changed.push(i);
            // past this point a rebuild is cheaper than patching
            if self.changed.len() * 64 > self.mask.len() {
                self.stale = true;
                self.changed.clear();
            }
        }
    }

    /// Solves for the current mask. CG starts from `guess` on the unknown
    /// pixels if given, as in [`inpaint_from`], and otherwise as in
    /// [`inpaint`].
    pub fn solve(&mut self, guess: Option<&Image>) -> Result<(Image, SolveStats)> {
        if let Some(g) = guess {
            self.f.ensure_same_shape(g)?;
        }
        if self.mask.count() == 0 {
            return Err(Error::Singular(
                "mask has no known pixels; the inpainting problem has no unique solution".into(),
            ));
        }
        let f = self.f;
        if self.mask.count() == self.mask.len() {
            let stats = ChannelStats {
                iterations: 0,
                final_rel_residual: 0.0,
                converged: true,
            };
            let stats = SolveStats {
                channels: vec![stats; f.channels()],
            };
            return Ok((f.clone(), stats));
        }
        self.sync_multigrid();

        let Inpainter {
            cfg,
            mask,
            grid,
            indicator,
            diag,
            multigrid,
            channels,
            ..
        } = self;
        let (grid, cfg, mask) = (*grid, *cfg, &*mask);
        let (indicator, diag, multigrid) = (&indicator[..], &diag[..], multigrid.as_ref());
        let max_iter = cfg.max_iterations_for(grid.width, grid.height);

        let solved: Vec<(Vec<f64>, ChannelStats)> = channels
            .par_iter_mut()
            .enumerate()
            .map(|(c, ch)| {
                grid.rhs(indicator, &ch.plane, &mut ch.b);
                let x = &mut ch.x;
                x.fill(0.0);
                match guess {
                    Some(g) => {
                        let g = g.channel(c);
                        for y in 0..grid.height {
                            let (at, i) = grid.row(y);
                            let row = at..at + grid.width;
                            let g = &g[i..i + grid.width];
                            for ((x, ind), g) in
                                x[row.clone()].iter_mut().zip(&indicator[row]).zip(g)
                            {
                                *x = ind * g;
                            }
                        }
                    }
                    // constant data has a constant solution; starting there
                    // makes it exact instead of accurate to the tolerance
                    None => {
                        if let Some(v) = known_constant(mask, f.channel(c)) {
                            for (x, ind) in x.iter_mut().zip(indicator) {
                                *x = ind * v;
                            }
                        }
                    }
                }

                let apply = |v: &[f64], o: &mut [f64]| grid.apply(indicator, diag, v, o);
                let tol = cfg.rel_residual_tol;
                let iterations = match multigrid {
                    Some(mg) => {
                        let work = ch.multigrid.get_or_insert_with(|| mg.workspace());
                        let precondition = |r: &[f64], z: &mut [f64]| mg.apply(r, z, work);
                        pcg(apply, precondition, &ch.b, x, tol, max_iter, &mut ch.cg).0
                    }
                    None => {
                        let identity = |r: &[f64], z: &mut [f64]| z.copy_from_slice(r);
                        pcg(apply, identity, &ch.b, x, tol, max_iter, &mut ch.cg).0
                    }
                };

                // the exact solution lies in [0, 1]; clip iterative overshoot and
                // report the residual of what is actually returned
                for v in x.iter_mut() {
                    *v = v.clamp(0.0, 1.0);
                }
                let ax = &mut ch.cg.ap;
                ax.resize(x.len(), 0.0);
                grid.apply(indicator, diag, x, ax);
                let r2: f64 =
                    ch.b.iter()
                        .zip(ax.iter())
                        .map(|(b, a)| (b - a) * (b - a))
                        .sum();
                let b_norm = dot(&ch.b, &ch.b).sqrt();
                let rel = if b_norm == 0.0 {
                    r2.sqrt()
                } else {
                    r2.sqrt() / b_norm
                };

                let mut out = f.channel(c).to_vec();
                for y in 0..grid.height {
                    let (at, i) = grid.row(y);
                    let row = at..at + grid.width;
                    let out = &mut out[i..i + grid.width];
                    for ((o, ind), x) in out.iter_mut().zip(&indicator[row.clone()]).zip(&x[row]) {
                        if *ind != 0.0 {
                            *o = *x;
                        }
                    }
                }
                let stats = ChannelStats {
                    iterations,
                    final_rel_residual: rel,
                    converged: rel <= cfg.rel_residual_tol,
                };
                (out, stats)
            })
            .collect();

        let mut planes = Vec::with_capacity(solved.len());
        let mut stats = SolveStats::default();
        for (plane, s) in solved {
            planes.push(plane);
            stats.channels.push(s);
        }
        Ok((Image::from_planes(f.width(), f.height(), planes)?, stats))
    }

    fn sync_multigrid(&mut self) {
        if self.cfg.preconditioner != Preconditioner::Multigrid {
            self.changed.clear();
            return;
        }
        match &mut self.multigrid {
            Some(mg) if !self.stale => mg.update(&self.changed, &self.indicator, &self.degree),
            slot => {
                *slot = Some(Multigrid::new(
                    self.grid.width,
                    self.grid.height,
                    &self.indicator,
                    &self.degree,
                ))
            }
        }
        self.changed.clear();
        self.stale = false;
    }
}

/// The common value of all known pixels, if there is one.
fn known_constant(mask: &Mask, plane: &[f64]) -> Option<f64> {
    let mut known = plane
        .iter()
        .zip(mask.bits())
        .filter(|(_, &k)| k)
        .map(|(v, _)| *v);
    let first = known.next()?;
    known.all(|v| v == first).then_some(first)
}

/// Euclidean norm of `(I - C) A u - C (u - f)` for every channel.
pub fn residual_norm(u: &Image, f: &Image, mask: &Mask) -> Result<Vec<f64>> {
    u.ensure_same_shape(f)?;
    u.ensure_mask(mask)?;
    let (w, h) = (u.width(), u.height());
    Ok((0..u.channels())
        .map(|c| {
            let (uc, fc) = (u.channel(c), f.channel(c));
            let au = apply_laplacian(w, h, uc);
            au.iter()
                .enumerate()
                .map(|(i, &a)| {
                    let r = if mask.is_known(i) { fc[i] - uc[i] } else { a };
                    r * r
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect())
}
