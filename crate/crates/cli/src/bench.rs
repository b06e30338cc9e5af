//! Density sweeps over a set of images, one CSV row per
//! (image, density, method).

use std::path::{Path, PathBuf};
use std::time::Instant;

use maskopt::{format_psnr, inpaint, load_pnm, metric_mse, metric_psnr, save_pbm, Image};
use rayon::prelude::*;

use crate::methods::{generate, MaskSettings, Method};

pub const HEADER: [&str; 8] = [
    "method",
    "image",
    "d_target",
    "d_achieved",
    "mse",
    "psnr",
    "wall_time_s",
    "cg_iters",
];

pub struct Sweep {
    pub images: Vec<PathBuf>,
    pub densities: Vec<f64>,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub settings: MaskSettings,
    pub mask_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Measurement {
    pub d_achieved: f64,
    pub mse: f64,
    pub psnr: f64,
    pub wall_time_s: f64,
    pub cg_iters: usize,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub method: Method,
    pub image: String,
    pub d_target: f64,
    pub result: Result<Measurement, maskopt::Error>,
}

impl Row {
    pub fn record(&self) -> Vec<String> {
        let mut out = vec![
            self.method.label().to_string(),
            self.image.clone(),
            self.d_target.to_string(),
        ];
        match &self.result {
            Ok(m) => out.extend([
                format!("{:.6}", m.d_achieved),
                format!("{:.6}", m.mse),
                format_psnr(m.psnr),
                format!("{:.4}", m.wall_time_s),
                m.cg_iters.to_string(),
            ]),
            // failed rows keep their place with empty measurements
            Err(_) => out.extend(std::iter::repeat_n(String::new(), 5)),
        }
        out
    }
}

/// Seed of one row, derived from the run seed and the row's image and
/// density position so rows do not depend on each other.
pub fn row_seed(seed: u64, image: usize, density: usize) -> u64 {
    seed ^ ((image as u64) << 32) ^ density as u64
}

fn display_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn measure(
    f: &Image,
    method: Method,
    density: f64,
    seed: u64,
    settings: &MaskSettings,
    mask_path: Option<PathBuf>,
) -> Result<Measurement, maskopt::Error> {
    let start = Instant::now();
    let mask = generate(f, method, density, seed, settings)?.mask;
    let (u, stats) = inpaint(f, &mask, &settings.solver)?;
    let mse = metric_mse(&u, f)?;
    let wall_time_s = start.elapsed().as_secs_f64();
    if let Some(path) = mask_path {
        std::fs::write(&path, save_pbm(&mask))
            .map_err(|e| maskopt::Error::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(Measurement {
        d_achieved: mask.density(),
        mse,
        psnr: metric_psnr(mse)?,
        wall_time_s,
        cg_iters: stats.total_iterations(),
    })
}

/// Runs every row; images are processed concurrently on `pool`, rows come
/// back in (image, density, method) order.
pub fn run(sweep: &Sweep, pool: &rayon::ThreadPool) -> Vec<Row> {
    let per_image: Vec<Vec<Row>> = pool.install(|| {
        sweep.images
            .par_iter()
            .enumerate()
            .map(|(ii, path)| {
                let name = display_name(path);
                let image = std::fs::read(path)
                    .map_err(|e| maskopt::Error::Io(format!("{}: {e}", path.display())))
                    .and_then(|bytes| load_pnm(&bytes));
                let mut rows = Vec::new();
                for (di, &density) in sweep.densities.iter().enumerate() {
                    for &method in &sweep.methods {
                        let result = match &image {
                            Ok(f) => {
                                let mask_path = sweep.mask_dir.as_ref().map(|dir| {
                                    let stem =
                                        path.file_stem().unwrap_or_default().to_string_lossy();
                                    dir.join(format!(
                                        "{stem}_{}_{density}.pbm",
                                        method.label().replace('+', "-")
                                    ))
                                });
                                let seed = row_seed(sweep.seed, ii, di);
                                measure(f, method, density, seed, &sweep.settings, mask_path)
                            }
                            Err(e) => Err(e.clone()),
                        };
                        rows.push(Row {
                            method,
                            image: name.clone(),
                            d_target: density,
                            result,
                        });
                    }
                }
                rows
            })
            .collect()
    });
    per_image.into_iter().flatten().collect()
}

pub fn write_csv<W: std::io::Write>(rows: &[Row], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}
