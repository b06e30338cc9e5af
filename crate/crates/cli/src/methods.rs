//! Mask generation shared by the `mask` and `bench` commands.

use clap::ValueEnum;
use maskopt::c2f::{self, DensityLevels, ExternalCommand, LocalGenerator};
use maskopt::{
    analytic_mask, make_layout, nlpe, sparsify, Image, Mask, NlpeConfig, PsConfig, SolverConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Dithered Laplacian magnitude
    Aa,
    /// Probabilistic sparsification
    Ps,
    /// Sparsification followed by nonlocal pixel exchange
    PsNlpe,
    /// Coarse-to-fine patch budgets with a local generator
    C2f,
}

impl Method {
    /// Name used in CSV output.
    pub fn label(self) -> &'static str {
        match self {
            Method::Aa => "AA",
            Method::Ps => "PS",
            Method::PsNlpe => "PS+NLPE",
            Method::C2f => "C2F",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Generator {
    /// Sparsification on every patch
    Ps,
    /// Dithering on every patch
    Dither,
    /// An external program (see --external)
    External,
}

/// Everything except the image, density and seed needed to build a mask.
#[derive(Debug, Clone)]
pub struct MaskSettings {
    pub candidate_fraction: f64,
    pub removal_fraction: f64,
    pub nlpe_cycles: usize,
    pub patch_size: usize,
    pub levels: DensityLevels,
    pub generator: Generator,
    pub external: Vec<String>,
    pub solver: SolverConfig,
    pub workers: usize,
}

impl MaskSettings {
    fn local_generator(&self) -> maskopt::Result<LocalGenerator> {
        Ok(match self.generator {
            Generator::Ps => LocalGenerator::Sparsification {
                candidate_fraction: self.candidate_fraction,
                removal_fraction: self.removal_fraction,
                solver: self.solver,
            },
            Generator::Dither => LocalGenerator::Dithering,
            Generator::External => {
                let (program, args) = self.external.split_first().ok_or_else(|| {
                    maskopt::Error::Config(
                        "--generator external needs --external PROGRAM [ARGS]".into(),
                    )
                })?;
                LocalGenerator::External(ExternalCommand::new(program.clone(), args.to_vec()))
            }
        })
    }

    fn ps(&self, density: f64, seed: u64) -> PsConfig {
        PsConfig {
            candidate_fraction: self.candidate_fraction,
            removal_fraction: self.removal_fraction,
            density,
            seed,
        }
    }
}

pub struct Generated {
    pub mask: Mask,
    pub plan: Option<c2f::PatchDensityPlan>,
}

pub fn generate(
    f: &Image,
    method: Method,
    density: f64,
    seed: u64,
    s: &MaskSettings,
) -> maskopt::Result<Generated> {
    let mask = match method {
        Method::Aa => analytic_mask(f, density)?,
        Method::Ps => sparsify(f, &s.ps(density, seed), &s.solver)?,
        Method::PsNlpe => {
            let start = sparsify(f, &s.ps(density, seed), &s.solver)?;
            let cfg = NlpeConfig {
                cycles: s.nlpe_cycles,
                ..NlpeConfig::new(seed)
            };
            nlpe(f, &start, &cfg, &s.solver)?.mask
        }
        Method::C2f => {
            let layout = make_layout(f.width(), f.height(), s.patch_size)?;
            let generator = s.local_generator()?;
            let out = c2f::generate(f, density, &layout, &s.levels, &generator, seed, s.workers)?;
            return Ok(Generated {
                mask: out.mask,
                plan: Some(out.plan),
            });
        }
    };
    Ok(Generated { mask, plan: None })
}
