//! Mask selection for homogeneous-diffusion image inpainting.
//!
//! An image is stored only at the pixels of a binary [`Mask`]; everything
//! else is reconstructed by solving the Laplace equation with the stored
//! values as boundary data ([`inpaint`]). The quality of the reconstruction
//! depends almost entirely on where the stored pixels are, and this crate
//! provides several ways to choose them:
//!
//! * [`analytic_mask`]: dither the rescaled Laplacian magnitude. Fast, no
//!   solver calls.
//! * [`sparsify`]: probabilistic sparsification, removing pixels whose
//!   reconstruction error is smallest.
//! * [`nlpe`]: non-local pixel exchange, moving known pixels to where the
//!   error is large while the error keeps dropping.
//! * [`c2f::generate`]: split the budget over patches by local structure,
//!   then run one of the above per patch in parallel.
//!
//! ```
//! use maskopt::{analytic_mask, inpaint, metric_mse, metric_psnr, Image, SolverConfig};
//!
//! let f = Image::from_fn(32, 32, |x, y| ((x as f64 - 16.0).hypot(y as f64 - 16.0) / 23.0).min(1.0))?;
//! let mask = analytic_mask(&f, 0.1)?;
//! let (u, stats) = inpaint(&f, &mask, &SolverConfig::default())?;
//! assert!(stats.converged());
//! assert!(metric_psnr(metric_mse(&u, &f)?)? > 20.0);
//! # Ok::<(), maskopt::Error>(())
//! ```

pub mod c2f;
mod error;
mod image;
pub mod laplacian;
pub mod layout;
pub mod metrics;
mod multigrid;
pub mod oracle;
pub mod pnm;
pub mod soft;
pub mod solver;
pub mod stochastic;

pub use error::{Error, Result};
pub use image::{to_luma, Image, Mask, SoftMask, LUMA_WEIGHTS};
pub use laplacian::apply_laplacian;
pub use layout::{make_layout, PatchLayout, PatchRect, DEFAULT_PATCH_SIZE};
pub use metrics::{format_psnr, metric_mse, metric_psnr};
pub use pnm::{load_pbm, load_pnm, save_pbm, save_pnm};
pub use soft::{analytic_mask, floyd_steinberg, laplacian_magnitude, rescale_to_density};
pub use solver::{
    inpaint, inpaint_from, residual_norm, Inpainter, Preconditioner, SolveStats, SolverConfig,
};
pub use stochastic::{nlpe, sparsify, NlpeConfig, NlpeOutcome, PsConfig};
