//! Aggregation multigrid preconditioner for the reduced inpainting system.
//!
//! Every level is a weighted five-point graph Laplacian plus a diagonal
//! Dirichlet term, `(A u)_i = d_i u_i + Σ_j w_ij (u_i - u_j)`. The finest
//! level is `-A_UU`: edges between unknowns have weight 1 and each known
//! neighbour adds 1 to `d_i`. Coarser levels merge 2×2 blocks; with
//! piecewise-constant transfer the Galerkin product keeps the same form, with
//! summed crossing-edge weights and summed Dirichlet terms. The coarsest
//! level is solved exactly by a dense Cholesky factorisation.
//!
//! One application is a V-cycle with the same number of damped Jacobi steps
//! before and after the coarse correction, which keeps it symmetric. The
//! coarse correction is scaled by a constant in (1, 2); piecewise-constant
//! interpolation underestimates smooth errors and the scaling compensates.
//! The hierarchy can be patched in place when a few mask pixels change.

const COARSEST_NODES: usize = 64;
const SMOOTHING_STEPS: usize = 2;
const JACOBI_WEIGHT: f32 = 0.8;
const COARSE_SCALE: f32 = 1.5;

/// Half-open rectangle of level nodes.
#[derive(Debug, Clone, Copy)]
struct Region {
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
}

impl Region {
    /// The coarse nodes whose data can change when `self` changes on the
    /// finer level.
    fn coarsened(self, nx: usize, ny: usize) -> Region {
        Region {
            x0: (self.x0 / 2).saturating_sub(1),
            x1: ((self.x1 - 1) / 2 + 2).min(nx),
            y0: (self.y0 / 2).saturating_sub(1),
            y1: ((self.y1 - 1) / 2 + 2).min(ny),
        }
    }
}

/// One grid level. Vectors are stored with one zero pixel of padding on
/// each side; inactive nodes have zero diagonal and zero edge weights.
struct Level {
    nx: usize,
    ny: usize,
    stride: usize,
    /// Weight of the edge to the east neighbour.
    east: Vec<f32>,
    /// Weight of the edge to the south neighbour.
    south: Vec<f32>,
    dirichlet: Vec<f32>,
    diag: Vec<f32>,
    /// `ω / diag` on active nodes, 0 elsewhere.
    damped_inv: Vec<f32>,
    /// 1 on active nodes, 0 elsewhere.
    active: Vec<f32>,
    /// Every edge between active nodes has weight 1, as on the finest level.
    unit_weights: bool,
}

impl Level {
    fn zeros(nx: usize, ny: usize) -> Level {
        let stride = nx + 2;
        let len = stride * (ny + 2);
        Level {
            nx,
            ny,
            stride,
            east: vec![0.0; len],
            south: vec![0.0; len],
            dirichlet: vec![0.0; len],
            diag: vec![0.0; len],
            damped_inv: vec![0.0; len],
            active: vec![0.0; len],
            unit_weights: false,
        }
    }

    fn len(&self) -> usize {
        self.stride * (self.ny + 2)
    }

    fn whole(&self) -> Region {
        Region {
            x0: 0,
            x1: self.nx,
            y0: 0,
            y1: self.ny,
        }
    }

    fn index(&self, x: usize, y: usize) -> usize {
        (y + 1) * self.stride + x + 1
    }

    /// Fine-level weights from the padded unknown indicator and the
    /// in-range neighbour counts (same layout as this level).
    fn assign_fine(&mut self, region: Region, indicator: &[f64], degree: &[f64]) {
        let s = self.stride;
        for y in region.y0..region.y1 {
            for x in region.x0..region.x1 {
                let k = self.index(x, y);
                let here = indicator[k];
                self.east[k] = (here * indicator[k + 1]) as f32;
                self.south[k] = (here * indicator[k + s]) as f32;
                let unknown_nbrs =
                    indicator[k + 1] + indicator[k - 1] + indicator[k + s] + indicator[k - s];
                self.dirichlet[k] = (here * (degree[k] - unknown_nbrs)) as f32;
            }
        }
        self.refresh(region);
    }

    /// Galerkin aggregation of `fine` onto the nodes in `region`.
    fn assign_coarse(&mut self, region: Region, fine: &Level) {
        for y in region.y0..region.y1 {
            for x in region.x0..region.x1 {
                let (fx, fy) = (2 * x, 2 * y);
                let xs = fx..(fx + 2).min(fine.nx);
                let ys = fy..(fy + 2).min(fine.ny);
                let mut dirichlet = 0.0;
                for j in ys.clone() {
                    for i in xs.clone() {
                        dirichlet += fine.dirichlet[fine.index(i, j)];
                    }
                }
                // only edges leaving the 2×2 block survive
                let mut east = 0.0;
                if fx + 1 < fine.nx {
                    for j in ys.clone() {
                        east += fine.east[fine.index(fx + 1, j)];
                    }
                }
                let mut south = 0.0;
                if fy + 1 < fine.ny {
                    for i in xs.clone() {
                        south += fine.south[fine.index(i, fy + 1)];
                    }
                }
                let k = self.index(x, y);
                self.dirichlet[k] = dirichlet;
                self.east[k] = east;
                self.south[k] = south;
            }
        }
        self.refresh(region);
    }

    fn refresh(&mut self, region: Region) {
        let s = self.stride;
        for y in region.y0..region.y1 {
            for x in region.x0..region.x1 {
                let k = self.index(x, y);
                let d = self.dirichlet[k]
                    + self.east[k]
                    + self.east[k - 1]
                    + self.south[k]
                    + self.south[k - s];
                self.diag[k] = d;
                let on = d > 0.0;
                self.active[k] = if on { 1.0 } else { 0.0 };
                self.damped_inv[k] = if on { JACOBI_WEIGHT / d } else { 0.0 };
            }
        }
    }

    /// Calls `row_op` on every interior row with the slices it needs.
    fn rows(&self, u: &[f32], mut row_op: impl FnMut(usize, Stencil<'_>)) {
        let (s, nx) = (self.stride, self.nx);
        for y in 1..=self.ny {
            let at = y * s + 1;
            row_op(
                at,
                Stencil {
                    centre: &u[at..at + nx],
                    left: &u[at - 1..at - 1 + nx],
                    right: &u[at + 1..at + 1 + nx],
                    above: &u[at - s..at - s + nx],
                    below: &u[at + s..at + s + nx],
                    east: &self.east[at..at + nx],
                    west: &self.east[at - 1..at - 1 + nx],
                    north: &self.south[at - s..at - s + nx],
                    south: &self.south[at..at + nx],
                    diag: &self.diag[at..at + nx],
                },
            );
        }
    }

    /// `r = b - A u`.
    fn residual(&self, u: &[f32], b: &[f32], r: &mut [f32]) {
        let nx = self.nx;
        self.rows(u, |at, st| {
            let b = &b[at..at + nx];
            let r = &mut r[at..at + nx];
            if self.unit_weights {
                let active = &self.active[at..at + nx];
                let Stencil {
                    centre,
                    left,
                    right,
                    above,
                    below,
                    diag,
                    ..
                } = st;
                for k in 0..nx {
                    let sum = left[k] + right[k] + above[k] + below[k];
                    r[k] = b[k] - diag[k] * centre[k] + active[k] * sum;
                }
            } else {
                for k in 0..nx {
                    r[k] = b[k] - st.apply(k);
                }
            }
        });
    }

    /// One damped Jacobi step from `u` into `out`. `u` must vanish on
    /// inactive nodes.
    fn jacobi(&self, u: &[f32], b: &[f32], out: &mut [f32]) {
        let nx = self.nx;
        self.rows(u, |at, st| {
            let b = &b[at..at + nx];
            let inv = &self.damped_inv[at..at + nx];
            let out = &mut out[at..at + nx];
            if self.unit_weights {
                // inactive rows have inv = 0, so their neighbour sum is ignored
                let Stencil {
                    centre,
                    left,
                    right,
                    above,
                    below,
                    diag,
                    ..
                } = st;
                for k in 0..nx {
                    let sum = left[k] + right[k] + above[k] + below[k];
                    out[k] = centre[k] + inv[k] * (b[k] - diag[k] * centre[k] + sum);
                }
            } else {
                for k in 0..nx {
                    out[k] = st.centre[k] + inv[k] * (b[k] - st.apply(k));
                }
            }
        });
    }

    /// Sums each 2×2 block of `fine` into the matching node of `out`.
    fn restrict(&self, coarse: &Level, fine: &[f32], out: &mut [f32]) {
        let (nx, pairs) = (self.nx, self.nx / 2);
        for cy in 0..coarse.ny {
            let top = &fine[(2 * cy + 1) * self.stride + 1..][..nx];
            // a missing second row reads the zero padding below the grid
            let bottom = &fine[(2 * cy + 2) * self.stride + 1..][..nx];
            let crow = &mut out[(cy + 1) * coarse.stride + 1..][..coarse.nx];
            for c in 0..pairs {
                crow[c] = top[2 * c] + top[2 * c + 1] + bottom[2 * c] + bottom[2 * c + 1];
            }
            if nx % 2 == 1 {
                crow[pairs] = top[nx - 1] + bottom[nx - 1];
            }
        }
    }

    /// Adds the scaled coarse value of each block to its active fine nodes.
    fn prolong_add(&self, coarse: &Level, coarse_u: &[f32], fine: &mut [f32]) {
        let (nx, pairs) = (self.nx, self.nx / 2);
        for y in 0..self.ny {
            let at = (y + 1) * self.stride + 1;
            let frow = &mut fine[at..at + nx];
            let active = &self.active[at..at + nx];
            let crow = &coarse_u[(y / 2 + 1) * coarse.stride + 1..][..coarse.nx];
            for c in 0..pairs {
                let v = COARSE_SCALE * crow[c];
                frow[2 * c] += active[2 * c] * v;
                frow[2 * c + 1] += active[2 * c + 1] * v;
            }
            if nx % 2 == 1 {
                frow[nx - 1] += active[nx - 1] * COARSE_SCALE * crow[pairs];
            }
        }
    }
}

/// Row slices around one row of a level.
struct Stencil<'a> {
    centre: &'a [f32],
    left: &'a [f32],
    right: &'a [f32],
    above: &'a [f32],
    below: &'a [f32],
    east: &'a [f32],
    west: &'a [f32],
    north: &'a [f32],
    south: &'a [f32],
    diag: &'a [f32],
}

impl Stencil<'_> {
    #[inline(always)]
    fn apply(&self, k: usize) -> f32 {
        self.diag[k] * self.centre[k]
            - self.east[k] * self.right[k]
            - self.west[k] * self.left[k]
            - self.south[k] * self.below[k]
            - self.north[k] * self.above[k]
    }
}

/// Dense Cholesky factor of the coarsest level. Inactive nodes get a unit
/// diagonal so the factor exists; their right-hand side is always zero.
struct CoarseSolver {
    n: usize,
    factor: Vec<f64>,
}

impl CoarseSolver {
    fn new(level: &Level) -> CoarseSolver {
        let n = level.nx * level.ny;
        let mut a = vec![0.0f64; n * n];
        for y in 0..level.ny {
            for x in 0..level.nx {
                let i = y * level.nx + x;
                let k = level.index(x, y);
                a[i * n + i] = if level.active[k] > 0.0 {
                    level.diag[k] as f64
                } else {
                    1.0
                };
                if x + 1 < level.nx {
                    let w = level.east[k] as f64;
                    a[i * n + i + 1] = -w;
                    a[(i + 1) * n + i] = -w;
                }
                if y + 1 < level.ny {
                    let w = level.south[k] as f64;
                    a[i * n + i + level.nx] = -w;
                    a[(i + level.nx) * n + i] = -w;
                }
            }
        }
        // in-place lower Cholesky factor
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= a[j * n + k] * a[j * n + k];
            }
            let d = d.max(f64::MIN_POSITIVE).sqrt();
            a[j * n + j] = d;
            for i in j + 1..n {
                let mut v = a[i * n + j];
                for k in 0..j {
                    v -= a[i * n + k] * a[j * n + k];
                }
                a[i * n + j] = v / d;
            }
        }
        CoarseSolver { n, factor: a }
    }

    fn solve(&self, level: &Level, b: &[f32], u: &mut [f32], scratch: &mut Vec<f64>) {
        let n = self.n;
        let l = &self.factor;
        scratch.clear();
        for y in 0..level.ny {
            for x in 0..level.nx {
                scratch.push(b[level.index(x, y)] as f64);
            }
        }
        for i in 0..n {
            let mut v = scratch[i];
            for k in 0..i {
                v -= l[i * n + k] * scratch[k];
            }
            scratch[i] = v / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut v = scratch[i];
            for k in i + 1..n {
                v -= l[k * n + i] * scratch[k];
            }
            scratch[i] = v / l[i * n + i];
        }
        for y in 0..level.ny {
            for x in 0..level.nx {
                let k = level.index(x, y);
                u[k] = scratch[y * level.nx + x] as f32 * level.active[k];
            }
        }
    }
}

/// Work vectors of one level.
struct Buffers {
    u: Vec<f32>,
    b: Vec<f32>,
    scratch: Vec<f32>,
}

pub(crate) struct Multigrid {
    levels: Vec<Level>,
    coarsest: CoarseSolver,
}

/// Scratch space for [`Multigrid::apply`], one per concurrent user.
pub(crate) struct Workspace {
    buffers: Vec<Buffers>,
    dense: Vec<f64>,
}

impl Multigrid {
    /// Builds the hierarchy for `-A_UU` from the unknown indicator and the
    /// in-range neighbour counts, both on the padded fine grid.
    pub(crate) fn new(width: usize, height: usize, indicator: &[f64], degree: &[f64]) -> Multigrid {
        let mut fine = Level::zeros(width, height);
        fine.unit_weights = true;
        fine.assign_fine(fine.whole(), indicator, degree);
        let mut levels = vec![fine];
        while let Some(last) = levels.last() {
            if last.nx * last.ny <= COARSEST_NODES {
                break;
            }
            let mut next = Level::zeros(last.nx.div_ceil(2), last.ny.div_ceil(2));
            next.assign_coarse(next.whole(), last);
            levels.push(next);
        }
        let coarsest = CoarseSolver::new(levels.last().expect("at least one level"));
        Multigrid { levels, coarsest }
    }

    /// Patches the hierarchy after the unknown set changed at `pixels`
    /// (unpadded fine-grid indices); `indicator` and `degree` are current.
    pub(crate) fn update(&mut self, pixels: &[usize], indicator: &[f64], degree: &[f64]) {
        if pixels.is_empty() {
            return;
        }
        for &p in pixels {
            let fine = &mut self.levels[0];
            let (x, y) = (p % fine.nx, p / fine.nx);
            let mut region = Region {
                x0: x.saturating_sub(1),
                x1: (x + 2).min(fine.nx),
                y0: y.saturating_sub(1),
                y1: (y + 2).min(fine.ny),
            };
            fine.assign_fine(region, indicator, degree);
            for d in 1..self.levels.len() {
                let (finer, coarser) = self.levels.split_at_mut(d);
                let coarse = &mut coarser[0];
                region = region.coarsened(coarse.nx, coarse.ny);
                coarse.assign_coarse(region, &finer[d - 1]);
            }
        }
        self.coarsest = CoarseSolver::new(self.levels.last().expect("at least one level"));
    }

    pub(crate) fn workspace(&self) -> Workspace {
        Workspace {
            buffers: self
                .levels
                .iter()
                .map(|l| Buffers {
                    u: vec![0.0; l.len()],
                    b: vec![0.0; l.len()],
                    scratch: vec![0.0; l.len()],
                })
                .collect(),
            dense: Vec::with_capacity(self.coarsest.n),
        }
    }

    /// `z ≈ A⁻¹ r` by one V-cycle from zero.
    ///
    /// The hierarchy works in single precision; only the outer iteration
    /// needs full accuracy.
    pub(crate) fn apply(&self, r: &[f64], z: &mut [f64], work: &mut Workspace) {
        // normalise so tiny residuals survive the conversion
        let scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            z.fill(0.0);
            return;
        }
        let buffers = &mut work.buffers;
        for (b, &r) in buffers[0].b.iter_mut().zip(r) {
            *b = (r / scale) as f32;
        }
        self.cycle(0, buffers, &mut work.dense);
        for (z, &u) in z.iter_mut().zip(&buffers[0].u) {
            *z = u as f64 * scale;
        }
    }

    /// Solves on `buffers[0]` starting from zero.
    fn cycle(&self, depth: usize, buffers: &mut [Buffers], dense: &mut Vec<f64>) {
        let level = &self.levels[depth];
        let (here, deeper) = buffers.split_first_mut().expect("one buffer set per level");
        if deeper.is_empty() {
            self.coarsest.solve(level, &here.b, &mut here.u, dense);
            return;
        }

        // the first step from zero is just the scaled right-hand side
        for ((u, b), inv) in here.u.iter_mut().zip(&here.b).zip(&level.damped_inv) {
            *u = inv * b;
        }
        let smooth = |here: &mut Buffers, steps: usize| {
            for _ in 0..steps {
                level.jacobi(&here.u, &here.b, &mut here.scratch);
                std::mem::swap(&mut here.u, &mut here.scratch);
            }
        };
        smooth(here, SMOOTHING_STEPS - 1);

        let coarse = &self.levels[depth + 1];
        level.residual(&here.u, &here.b, &mut here.scratch);
        level.restrict(coarse, &here.scratch, &mut deeper[0].b);
        self.cycle(depth + 1, deeper, dense);
        level.prolong_add(coarse, &deeper[0].u, &mut here.u);
        smooth(here, SMOOTHING_STEPS);
    }
}
