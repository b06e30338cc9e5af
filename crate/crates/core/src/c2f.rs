//! Coarse-to-fine mask generation.
//!
//! The pixel budget is distributed over patches before any local mask is
//! built:
//!
//! 1. take the Laplacian magnitude of the luma channel,
//! 2. rescale it so its global mean equals the target density `d`,
//! 3. average the rescaled map over each patch to get a raw patch density,
//! 4. snap raw densities to the admissible [`DensityLevels`] while keeping
//!    the area-weighted mean close to `d`, and run a local generator per patch,
//! 5. paste the patch masks together.
//!
//! Step 4 runs patches in parallel; each patch gets the seed
//! `seed ^ patch_index`, so the result does not depend on scheduling.

use std::fmt::Write as _;
use std::io::Write as _;
use std::process::{Command, Stdio};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{to_luma, Image, Mask};
use crate::layout::{PatchLayout, PatchRect};
use crate::pnm::{load_pbm, save_pnm};
use crate::soft::{floyd_steinberg, laplacian_magnitude, rescale_to_density};
use crate::solver::SolverConfig;
use crate::stochastic::{sparsify, PsConfig};

/// Stop adjusting a plan once its mean is this close to the target.
pub const PLAN_MEAN_TOLERANCE: f64 = 0.0005;

/// Ordered set of densities a local generator is available for.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityLevels(Vec<f64>);

impl Default for DensityLevels {
    /// 0.5 %, then 1–15 % in steps of 1 %, 15–25 % in steps of 2 %,
    /// 25–50 % in steps of 5 % and 50–80 % in steps of 10 %.
    fn default() -> Self {
        DensityLevels(vec![
            0.005, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.10, 0.11, 0.12, 0.13,
            0.14, 0.15, 0.17, 0.19, 0.21, 0.23, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.60, 0.70,
            0.80,
        ])
    }
}

impl DensityLevels {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Config("density level set is empty".into()));
        }
        if levels.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
            return Err(Error::Config("density levels must lie in (0, 1)".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "density levels must be strictly increasing".into(),
            ));
        }
        Ok(DensityLevels(levels))
    }

    /// Parses a comma-separated list such as `0.01,0.02,0.05`.
    pub fn parse(list: &str) -> Result<Self> {
        let levels = list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad density level {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(levels)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn min(&self) -> f64 {
        self.0[0]
    }

    pub fn max(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    /// Index of the level closest to `x`; ties go to the lower level.
    pub fn nearest(&self, x: f64) -> usize {
        let mut best = 0;
        for (i, &l) in self.0.iter().enumerate().skip(1) {
            if (l - x).abs() < (self.0[best] - x).abs() {
                best = i;
            }
        }
        best
    }
}

/// How closely a plan matches its target mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanStatus {
    /// Area-weighted mean within [`PLAN_MEAN_TOLERANCE`] of the target.
    Matched,
    /// No single-level move brings the mean closer; best effort returned.
    Approximate,
    /// The target lies outside the level range; every patch sits at the
    /// nearest end of it.
    Clamped,
}

/// Per-patch density budget.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchDensityPlan {
    pub layout: PatchLayout,
    pub raw: Vec<f64>,
    pub assigned: Vec<f64>,
    pub status: PlanStatus,
}

impl PatchDensityPlan {
    pub fn mean_assigned(&self) -> f64 {
        self.layout.area_weighted_mean(&self.assigned)
    }

    /// CSV with one line per patch: `row,col,raw,assigned`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,raw,assigned\n");
        for ((p, raw), level) in self
            .layout
            .patches()
            .iter()
            .zip(&self.raw)
            .zip(&self.assigned)
        {
            let _ = writeln!(out, "{},{},{raw:.6},{level}", p.row, p.col);
        }
        out
    }
}

/// Mean of the rescaled Laplacian magnitude over each patch.
pub fn estimate_patch_densities(f: &Image, d: f64, layout: &PatchLayout) -> Result<Vec<f64>> {
    if layout.width() != f.width() || layout.height() != f.height() {
        return Err(Error::mismatch(
            format!("{}x{} layout", f.width(), f.height()),
            format!("{}x{} layout", layout.width(), layout.height()),
        ));
    }
    let soft = rescale_to_density(&laplacian_magnitude(&to_luma(f))?, d)?;
    let w = f.width();
    Ok(layout
        .patches()
        .iter()
        .map(|p| {
            let sum: f64 = (p.y..p.y + p.height)
                .map(|y| {
                    soft.values()[y * w + p.x..y * w + p.x + p.width]
                        .iter()
                        .sum::<f64>()
                })
                .sum();
            sum / p.area() as f64
        })
        .collect())
}

/// Snaps raw patch densities to `levels` with area-weighted mean close to `d`.
///
/// Every patch starts at its nearest level. While the mean misses `d` by more
/// than [`PLAN_MEAN_TOLERANCE`], one patch moves one level in the correcting
/// direction: among the moves that bring the mean strictly closer to `d`,
/// the one whose new level is closest to that patch's raw density wins
/// (lower patch index on ties).
pub fn quantise_plan(
    layout: &PatchLayout,
    raw: &[f64],
    levels: &DensityLevels,
    d: f64,
) -> Result<PatchDensityPlan> {
    if raw.len() != layout.len() {
        return Err(Error::mismatch(
            format!("{} patch densities", layout.len()),
            format!("{} patch densities", raw.len()),
        ));
    }
    let lv = levels.as_slice();
    if d < levels.min() || d > levels.max() {
        let level = if d < levels.min() {
            levels.min()
        } else {
            levels.max()
        };
        return Ok(PatchDensityPlan {
            layout: layout.clone(),
            raw: raw.to_vec(),
            assigned: vec![level; raw.len()],
            status: PlanStatus::Clamped,
        });
    }

    let total = (layout.width() * layout.height()) as f64;
    let weights: Vec<f64> = layout
        .patches()
        .iter()
        .map(|p| p.area() as f64 / total)
        .collect();
    let mut index: Vec<usize> = raw.iter().map(|&r| levels.nearest(r)).collect();
    let mut mean: f64 = index.iter().zip(&weights).map(|(&i, w)| lv[i] * w).sum();
    let mut status = PlanStatus::Matched;

    let max_moves = raw.len() * lv.len();
    for _ in 0..=max_moves {
        let deviation = mean - d;
        if deviation.abs() <= PLAN_MEAN_TOLERANCE {
            status = PlanStatus::Matched;
            break;
        }
        let up = deviation < 0.0;
        let mut best: Option<(f64, usize, usize, f64)> = None;
        for (p, &i) in index.iter().enumerate() {
            let next = match (up, i) {
                (true, i) if i + 1 < lv.len() => i + 1,
                (false, i) if i > 0 => i - 1,
                _ => continue,
            };
            let new_mean = mean + weights[p] * (lv[next] - lv[i]);
            if (new_mean - d).abs() >= deviation.abs() {
                continue;
            }
            let cost = (raw[p] - lv[next]).abs();
            if best.is_none_or(|(c, ..)| cost < c) {
                best = Some((cost, p, next, new_mean));
            }
        }
        match best {
            Some((_, p, next, new_mean)) => {
                index[p] = next;
                mean = new_mean;
            }
            None => {
                status = PlanStatus::Approximate;
                break;
            }
        }
    }

    Ok(PatchDensityPlan {
        layout: layout.clone(),
        raw: raw.to_vec(),
        assigned: index.iter().map(|&i| lv[i]).collect(),
        status,
    })
}

/// Raw densities followed by quantisation.
pub fn plan(
    f: &Image,
    d: f64,
    layout: &PatchLayout,
    levels: &DensityLevels,
) -> Result<PatchDensityPlan> {
    let raw = estimate_patch_densities(f, d, layout)?;
    quantise_plan(layout, &raw, levels, d)
}

/// Known-pixel density of `mask` inside each patch.
pub fn patch_densities(mask: &Mask, layout: &PatchLayout) -> Vec<f64> {
    layout
        .patches()
        .iter()
        .map(|p| mask.count_in(p) as f64 / p.area() as f64)
        .collect()
}

/// An external program that produces a patch mask.
///
/// The patch is written to the program's stdin as binary PGM/PPM and a PBM
/// of the same size is expected on stdout. The arguments `{density}` and
/// `{seed}` are substituted, and the same values are exported as
/// `MASKOPT_DENSITY` and `MASKOPT_SEED`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalCommand {
    pub program: String,
    pub args: Vec<String>,
}

impl ExternalCommand {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        ExternalCommand {
            program: program.into(),
            args,
        }
    }

    fn run(&self, patch: &Image, density: f64, seed: u64) -> Result<Mask> {
        let density_s = density.to_string();
        let seed_s = seed.to_string();
        let args: Vec<String> = self
            .args
            .iter()
            .map(|a| {
                a.replace("{density}", &density_s)
                    .replace("{seed}", &seed_s)
            })
            .collect();
        let mut child = Command::new(&self.program)
            .args(&args)
            .env("MASKOPT_DENSITY", &density_s)
            .env("MASKOPT_SEED", &seed_s)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Io(format!("cannot start {}: {e}", self.program)))?;
        let input = save_pnm(patch);
        let mut stdin = child.stdin.take().expect("stdin is piped");
        let output = std::thread::scope(|s| {
            s.spawn(move || {
                // a generator may exit without draining its input
                let _ = stdin.write_all(&input);
            });
            child.wait_with_output()
        })?;
        if !output.status.success() {
            return Err(Error::Io(format!(
                "{} exited with {}: {}",
                self.program,
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let mask = load_pbm(&output.stdout)?;
        patch.ensure_mask(&mask)?;
        Ok(mask)
    }
}

/// Mask generator run on each patch.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalGenerator {
    /// Probabilistic sparsification of the patch.
    Sparsification {
        candidate_fraction: f64,
        removal_fraction: f64,
        solver: SolverConfig,
    },
    /// Floyd–Steinberg dithering of the patch's rescaled Laplacian magnitude.
    Dithering,
    External(ExternalCommand),
}

impl LocalGenerator {
    /// Sparsification with the default fractions and solver settings.
    pub fn sparsification() -> Self {
        let ps = PsConfig::new(0.5, 0);
        LocalGenerator::Sparsification {
            candidate_fraction: ps.candidate_fraction,
            removal_fraction: ps.removal_fraction,
            solver: SolverConfig::default(),
        }
    }

    pub fn generate_patch(&self, patch: &Image, density: f64, seed: u64) -> Result<Mask> {
        match self {
            LocalGenerator::Sparsification {
                candidate_fraction,
                removal_fraction,
                solver,
            } => {
                let cfg = PsConfig {
                    candidate_fraction: *candidate_fraction,
                    removal_fraction: *removal_fraction,
                    density,
                    seed,
                };
                sparsify(patch, &cfg, solver)
            }
            LocalGenerator::Dithering => {
                let map = laplacian_magnitude(&to_luma(patch))?;
                Ok(floyd_steinberg(&rescale_to_density(&map, density)?))
            }
            LocalGenerator::External(cmd) => cmd.run(patch, density, seed),
        }
    }
}

/// Result of [`generate`].
#[derive(Debug, Clone)]
pub struct CoarseToFine {
    pub mask: Mask,
    pub plan: PatchDensityPlan,
}

/// Plans patch budgets, runs `generator` on every patch with `workers`
/// threads and assembles the full mask.
pub fn generate(
    f: &Image,
    d: f64,
    layout: &PatchLayout,
    levels: &DensityLevels,
    generator: &LocalGenerator,
    seed: u64,
    workers: usize,
) -> Result<CoarseToFine> {
    let plan = plan(f, d, layout, levels)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;

    let run = |(index, (rect, &density)): (usize, (&PatchRect, &f64))| {
        let patch = f.crop(rect);
        generator
            .generate_patch(&patch, density, seed ^ index as u64)
            .map_err(|e| Error::Patch {
                patch: index,
                row: rect.row,
                col: rect.col,
                message: e.to_string(),
            })
    };
    let tiles: Vec<Result<Mask>> = pool.install(|| {
        layout
            .patches()
            .par_iter()
            .zip(plan.assigned.par_iter())
            .enumerate()
            .map(run)
            .collect()
    });

    let mut mask = Mask::empty(f.width(), f.height())?;
    for (rect, tile) in layout.patches().iter().zip(tiles) {
        mask.paste(rect, &tile?)?;
    }
    Ok(CoarseToFine { mask, plan })
}
