//! Probabilistic sparsification and nonlocal pixel exchange.
//!
//! Both optimisers are sequential: every step depends on the mask left by
//! the previous one. Randomness comes from a ChaCha8 stream seeded from the
//! configuration, and is consumed in a fixed order, so equal seeds give
//! bit-identical masks.
//!
//! Inpaintings after the first start CG from the previous reconstruction;
//! one [`Inpainter`] is kept across all steps.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::metrics::metric_mse;
use crate::solver::{Inpainter, SolverConfig};

/// `⌈fraction · count⌉`, tolerant of products like `0.3 · 10 = 3.0000000000000004`.
pub fn ceil_count(fraction: f64, count: usize) -> usize {
    let x = fraction * count as f64;
    (x - 1e-9 * x.max(1.0)).ceil().max(0.0) as usize
}

/// Number of known pixels a mask of density `d` has on `n` pixels.
pub fn target_count(d: f64, n: usize) -> usize {
    ceil_count(d, n).min(n)
}

/// Snapshot reported to progress observers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    pub iteration: usize,
    pub known: usize,
    pub density: f64,
    /// MSE (8-bit scale) of the most recent reconstruction.
    pub mse: f64,
}

/// Probabilistic sparsification parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsConfig {
    /// Fraction `p` of the current mask drawn as removal candidates.
    pub candidate_fraction: f64,
    /// Fraction `q` of the candidates removed for good per iteration.
    pub removal_fraction: f64,
    pub density: f64,
    pub seed: u64,
}

impl PsConfig {
    pub fn new(density: f64, seed: u64) -> Self {
        PsConfig {
            candidate_fraction: 0.3,
            removal_fraction: 0.005,
            density,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.candidate_fraction;
        let q = self.removal_fraction;
        let d = self.density;
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::Config(format!(
                "candidate fraction must lie in (0, 1], got {p}"
            )));
        }
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::Config(format!(
                "removal fraction must lie in (0, 1], got {q}"
            )));
        }
        if !(d > 0.0 && d < 1.0) {
            return Err(Error::Config(format!(
                "density must lie in (0, 1), got {d}"
            )));
        }
        Ok(())
    }
}

/// How a sparsification run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparsifyStatus {
    Completed,
    /// The starting mask was already at or below the target; returned as is.
    AlreadySparse,
}

#[derive(Debug, Clone)]
pub struct SparsifyOutcome {
    pub mask: Mask,
    pub status: SparsifyStatus,
    /// Number of inpaintings performed.
    pub iterations: usize,
    /// CG iterations summed over all inpaintings and channels.
    pub cg_iterations: usize,
}

/// Squared error summed over channels at pixel `i`.
fn pixel_error(u: &Image, f: &Image, i: usize) -> f64 {
    let n = f.pixel_count();
    (0..f.channels())
        .map(|c| {
            let d = u.data()[c * n + i] - f.data()[c * n + i];
            d * d
        })
        .sum()
}

/// Sparsifies the full mask of `f` down to `⌈d·n⌉` known pixels.
pub fn sparsify(f: &Image, cfg: &PsConfig, solver: &SolverConfig) -> Result<Mask> {
    Ok(sparsify_with(f, None, cfg, solver, &mut |_| {})?.mask)
}

/// Probabilistic sparsification with an optional starting mask and observer.
///
/// Each iteration draws `⌈p·|K|⌉` candidates uniformly from the current mask
/// `K`, inpaints without them and scores each by its own squared error. The
/// `⌈q·candidates⌉` with the smallest error are removed permanently, the rest
/// go back. The last iteration removes only as many as are needed to land
/// exactly on the target count.
pub fn sparsify_with(
    f: &Image,
    start: Option<&Mask>,
    cfg: &PsConfig,
    solver: &SolverConfig,
    observer: &mut dyn FnMut(&Progress),
) -> Result<SparsifyOutcome> {
    cfg.validate()?;
    solver.validate()?;
    let n = f.pixel_count();
    let target = target_count(cfg.density, n).max(1);
    let mask = match start {
        Some(m) => {
            f.ensure_mask(m)?;
            m.clone()
        }
        None => Mask::full(f.width(), f.height())?,
    };
    let mut known = mask.known_indices();
    if known.len() <= target {
        let status = if start.is_some() {
            SparsifyStatus::AlreadySparse
        } else {
            SparsifyStatus::Completed
        };
        return Ok(SparsifyOutcome {
            mask,
            status,
            iterations: 0,
            cg_iterations: 0,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut solve = Inpainter::new(f, mask, solver)?;
    let mut guess = f.clone();
    let mut iterations = 0;
    let mut cg_iterations = 0;
    while known.len() > target {
        let draw = ceil_count(cfg.candidate_fraction, known.len()).clamp(1, known.len() - 1);
        let candidates: Vec<usize> = sample(&mut rng, known.len(), draw)
            .into_iter()
            .map(|pos| known[pos])
            .collect();
        for &i in &candidates {
            solve.set_known(i, false);
        }
        let (u, stats) = solve.solve(Some(&guess))?;
        iterations += 1;
        cg_iterations += stats.total_iterations();

        let mut scored: Vec<(f64, usize)> = candidates
            .iter()
            .map(|&i| (pixel_error(&u, f, i), i))
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let remove = ceil_count(cfg.removal_fraction, draw)
            .max(1)
            .min(known.len() - target);
        for &(_, i) in &scored[remove..] {
            solve.set_known(i, true);
        }
        known.retain(|&i| solve.mask().is_known(i));

        observer(&Progress {
            iteration: iterations,
            known: known.len(),
            density: known.len() as f64 / n as f64,
            mse: metric_mse(&u, f)?,
        });
        guess = u;
    }
    Ok(SparsifyOutcome {
        mask: solve.mask().clone(),
        status: SparsifyStatus::Completed,
        iterations,
        cg_iterations,
    })
}

/// Nonlocal pixel exchange parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlpeConfig {
    /// Passes over the mask; each pass has `‖c‖₁` exchange attempts.
    pub cycles: usize,
    /// Mask pixels moved per attempt.
    pub exchange_count: usize,
    /// Random non-mask pixels from which the new positions are picked.
    pub candidate_pool: usize,
    /// Optional cap on the total number of attempts.
    pub iteration_cap: Option<usize>,
    pub seed: u64,
}

impl NlpeConfig {
    pub fn new(seed: u64) -> Self {
        NlpeConfig {
            cycles: 5,
            exchange_count: 1,
            candidate_pool: 30,
            iteration_cap: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cycles == 0 {
            return Err(Error::Config("NLPE needs at least one cycle".into()));
        }
        if self.exchange_count == 0 {
            return Err(Error::Config(
                "NLPE exchange count must be at least 1".into(),
            ));
        }
        if self.candidate_pool < self.exchange_count {
            return Err(Error::Config(format!(
                "candidate pool {} is smaller than the exchange count {}",
                self.candidate_pool, self.exchange_count
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NlpeOutcome {
    pub mask: Mask,
    pub initial_mse: f64,
    pub final_mse: f64,
    /// MSE after every accepted exchange, in order.
    pub accepted_mse: Vec<f64>,
    /// Exchange attempts made.
    pub iterations: usize,
    pub cg_iterations: usize,
}

/// Improves `mask` by nonlocal pixel exchange.
pub fn nlpe(
    f: &Image,
    mask: &Mask,
    cfg: &NlpeConfig,
    solver: &SolverConfig,
) -> Result<NlpeOutcome> {
    nlpe_with(f, mask, cfg, solver, &mut |_| {})
}

/// Nonlocal pixel exchange with a progress observer.
///
/// Each attempt picks `m` random mask pixels and a pool of random non-mask
/// pixels, and moves the mask pixels onto the `m` pool pixels with the
/// largest current reconstruction error. The exchange is kept only if the
/// global MSE strictly decreases. The observer sees every accepted exchange.
pub fn nlpe_with(
    f: &Image,
    mask: &Mask,
    cfg: &NlpeConfig,
    solver: &SolverConfig,
    observer: &mut dyn FnMut(&Progress),
) -> Result<NlpeOutcome> {
    cfg.validate()?;
    f.ensure_mask(mask)?;
    let n = f.pixel_count();
    let count = mask.count();
    if count == 0 || count == n {
        return Err(Error::InvalidValue(
            "pixel exchange needs a mask that is neither empty nor full".into(),
        ));
    }

    let mut known = mask.known_indices();
    let mut unknown = mask.unknown_indices();
    let mut solve = Inpainter::new(f, mask.clone(), solver)?;
    let (mut u, stats) = solve.solve(None)?;
    let mut cg_iterations = stats.total_iterations();
    let initial_mse = metric_mse(&u, f)?;
    let mut mse = initial_mse;
    let mut accepted_mse = Vec::new();

    let mut total = cfg.cycles.saturating_mul(count);
    if let Some(cap) = cfg.iteration_cap {
        total = total.min(cap);
    }
    let moves = cfg.exchange_count.min(known.len()).min(unknown.len());
    let pool = cfg.candidate_pool.min(unknown.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    for iteration in 1..=total {
        let leaving: Vec<usize> = sample(&mut rng, known.len(), moves).into_vec();
        let mut pool_pos: Vec<(f64, usize)> = sample(&mut rng, unknown.len(), pool)
            .into_iter()
            .map(|pos| (pixel_error(&u, f, unknown[pos]), pos))
            .collect();
        pool_pos.sort_by(|a, b| b.0.total_cmp(&a.0).then(unknown[a.1].cmp(&unknown[b.1])));
        let entering: Vec<usize> = pool_pos[..moves].iter().map(|&(_, pos)| pos).collect();

        for &pos in &leaving {
            solve.set_known(known[pos], false);
        }
        for &pos in &entering {
            solve.set_known(unknown[pos], true);
        }
        let (trial, stats) = solve.solve(Some(&u))?;
        cg_iterations += stats.total_iterations();
        let trial_mse = metric_mse(&trial, f)?;

        if trial_mse < mse {
            for (&out_pos, &in_pos) in leaving.iter().zip(&entering) {
                std::mem::swap(&mut known[out_pos], &mut unknown[in_pos]);
            }
            u = trial;
            mse = trial_mse;
            accepted_mse.push(mse);
            observer(&Progress {
                iteration,
                known: known.len(),
                density: known.len() as f64 / n as f64,
                mse,
            });
        } else {
            for &pos in &entering {
                solve.set_known(unknown[pos], false);
            }
            for &pos in &leaving {
                solve.set_known(known[pos], true);
            }
        }
    }

    Ok(NlpeOutcome {
        mask: solve.mask().clone(),
        initial_mse,
        final_mse: mse,
        accepted_mse,
        iterations: total,
        cg_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::inpaint;

    fn ramp(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |x, y| {
            (x as f64 + 0.5 * y as f64) / (w as f64 + 0.5 * h as f64)
        })
        .unwrap()
    }

    #[test]
    fn counts() {
        assert_eq!(ceil_count(0.3, 10), 3);
        assert_eq!(ceil_count(0.05, 256), 13);
        assert_eq!(ceil_count(0.005, 19661), 99);
        assert_eq!(target_count(0.999, 4), 4);
    }

    #[test]
    fn target_equal_to_size_returns_full_mask() {
        let f = ramp(8, 8);
        let cfg = PsConfig::new(0.999, 1);
        let out = sparsify_with(&f, None, &cfg, &SolverConfig::default(), &mut |_| {}).unwrap();
        assert_eq!(out.mask.count(), 64);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn constant_image_reaches_exact_count() {
        let f = Image::filled(16, 16, 1, 0.4).unwrap();
        let cfg = PsConfig::new(0.05, 3);
        let mask = sparsify(&f, &cfg, &SolverConfig::default()).unwrap();
        assert_eq!(mask.count(), 13);
        let (u, _) = inpaint(&f, &mask, &SolverConfig::default()).unwrap();
        assert!(metric_mse(&u, &f).unwrap() < 1e-12);
    }

    #[test]
    fn sparse_start_is_a_no_op() {
        let f = ramp(8, 8);
        let start = Mask::from_indices(8, 8, &[0, 9]).unwrap();
        let cfg = PsConfig::new(0.2, 1);
        let out = sparsify_with(
            &f,
            Some(&start),
            &cfg,
            &SolverConfig::default(),
            &mut |_| {},
        )
        .unwrap();
        assert_eq!(out.status, SparsifyStatus::AlreadySparse);
        assert_eq!(out.mask, start);
    }

    #[test]
    fn invalid_configs() {
        let f = ramp(8, 8);
        let s = SolverConfig::default();
        assert!(sparsify(&f, &PsConfig::new(1.0, 0), &s).is_err());
        let mut cfg = PsConfig::new(0.1, 0);
        cfg.candidate_fraction = 0.0;
        assert!(sparsify(&f, &cfg, &s).is_err());
        let mut n = NlpeConfig::new(0);
        n.candidate_pool = 0;
        assert!(n.validate().is_err());
    }

    #[test]
    fn nlpe_rejects_degenerate_masks() {
        let f = ramp(6, 6);
        let s = SolverConfig::default();
        let cfg = NlpeConfig::new(1);
        assert!(nlpe(&f, &Mask::full(6, 6).unwrap(), &cfg, &s).is_err());
        assert!(nlpe(&f, &Mask::empty(6, 6).unwrap(), &cfg, &s).is_err());
    }

    #[test]
    fn nlpe_keeps_an_optimal_mask() {
        let f = Image::filled(10, 10, 1, 0.6).unwrap();
        let mask = Mask::from_indices(10, 10, &[5, 50, 95]).unwrap();
        let out = nlpe(&f, &mask, &NlpeConfig::new(4), &SolverConfig::default()).unwrap();
        assert_eq!(out.mask, mask);
        assert!(out.accepted_mse.is_empty());
        assert_eq!(out.iterations, 15);
    }

    #[test]
    fn nlpe_preserves_count_and_improves() {
        let f = Image::from_fn(16, 16, |x, y| {
            let (x, y) = (x as f64 / 15.0, y as f64 / 15.0);
            (x * x * 0.7 + 0.3 * y).min(1.0)
        })
        .unwrap();
        let mask = Mask::from_indices(16, 16, &[0, 1, 2, 3, 16, 17, 18, 19]).unwrap();
        let mut cfg = NlpeConfig::new(9);
        cfg.cycles = 2;
        let out = nlpe(&f, &mask, &cfg, &SolverConfig::default()).unwrap();
        assert_eq!(out.mask.count(), 8);
        assert!(out.final_mse < out.initial_mse);
        assert!(out.accepted_mse.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn iteration_cap_limits_attempts() {
        let f = ramp(12, 12);
        let mask = Mask::from_indices(12, 12, &[0, 7, 70, 143]).unwrap();
        let mut cfg = NlpeConfig::new(2);
        cfg.iteration_cap = Some(3);
        let out = nlpe(&f, &mask, &cfg, &SolverConfig::default()).unwrap();
        assert_eq!(out.iterations, 3);
    }
}
