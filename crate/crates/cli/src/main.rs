use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use maskopt::c2f::{self, DensityLevels};
use maskopt::{
    format_psnr, inpaint, load_pbm, load_pnm, make_layout, metric_mse, metric_psnr, save_pbm,
    save_pnm, Image, Mask, Preconditioner, SolverConfig, DEFAULT_PATCH_SIZE,
};

mod bench;
mod methods;

use methods::{Generator, MaskSettings, Method};

/// Inpainting masks for homogeneous diffusion.
#[derive(Debug, Parser)]
#[command(name = "maskopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reconstruct an image from the pixels selected by a mask
    Inpaint(InpaintArgs),
    /// Select a mask of the requested density
    Mask(MaskArgs),
    /// Report the reconstruction error of a mask
    Eval(EvalArgs),
    /// Sweep methods and densities over a set of images
    Bench(BenchArgs),
    /// Print the per-patch density plan
    Plan(PlanArgs),
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Relative residual tolerance of the conjugate gradient solver
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Iteration cap (default: 10 * max(width, height))
    #[arg(long)]
    max_iter: Option<usize>,
    /// Disable the multigrid preconditioner
    #[arg(long)]
    plain_cg: bool,
}

impl SolverArgs {
    fn config(&self) -> maskopt::Result<SolverConfig> {
        let cfg = SolverConfig {
            rel_residual_tol: self.tol,
            max_iterations: self.max_iter,
            preconditioner: if self.plain_cg {
                Preconditioner::None
            } else {
                Preconditioner::Multigrid
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct WorkerArgs {
    /// Worker threads (default: available cores)
    #[arg(long, env = "MASKOPT_WORKERS")]
    workers: Option<usize>,
}

impl WorkerArgs {
    fn count(&self) -> maskopt::Result<usize> {
        match self.workers {
            Some(0) => Err(maskopt::Error::Config(
                "worker count must be at least 1".into(),
            )),
            Some(n) => Ok(n),
            None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }
}

#[derive(Debug, Args)]
struct MaskOptions {
    /// Patch edge length for c2f
    #[arg(long, default_value_t = DEFAULT_PATCH_SIZE)]
    patch_size: usize,
    /// Comma-separated density levels for c2f
    #[arg(long)]
    levels: Option<String>,
    /// Local generator used by c2f
    #[arg(long, value_enum, default_value_t = Generator::Ps)]
    generator: Generator,
    /// External generator: PROGRAM [ARGS...]; `{density}` and `{seed}` are substituted
    #[arg(long, num_args = 1.., allow_hyphen_values = true, value_name = "PROGRAM")]
    external: Vec<String>,
    /// Exchange cycles for ps-nlpe
    #[arg(long, default_value_t = 5)]
    nlpe_cycles: usize,
    /// Fraction of known pixels drawn as removal candidates
    #[arg(long, default_value_t = 0.3)]
    candidate_fraction: f64,
    /// Fraction of candidates removed per sparsification step
    #[arg(long, default_value_t = 0.005)]
    removal_fraction: f64,
    #[command(flatten)]
    workers: WorkerArgs,
    #[command(flatten)]
    solver: SolverArgs,
}

impl MaskOptions {
    fn settings(&self) -> maskopt::Result<MaskSettings> {
        Ok(MaskSettings {
            candidate_fraction: self.candidate_fraction,
            removal_fraction: self.removal_fraction,
            nlpe_cycles: self.nlpe_cycles,
            patch_size: self.patch_size,
            levels: parse_levels(self.levels.as_deref())?,
            generator: self.generator,
            external: self.external.clone(),
            solver: self.solver.config()?,
            workers: self.workers.count()?,
        })
    }
}

#[derive(Debug, Args)]
struct InpaintArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    /// Output PGM/PPM
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
struct MaskArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    /// Target fraction of known pixels, in (0, 1)
    #[arg(long)]
    density: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output PBM
    #[arg(long)]
    output: PathBuf,
    /// Also write the c2f patch plan as CSV
    #[arg(long)]
    plan_csv: Option<PathBuf>,
    #[command(flatten)]
    options: MaskOptions,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, num_args = 1.., required = true)]
    images: Vec<PathBuf>,
    /// Comma-separated methods
    #[arg(long, value_enum, value_delimiter = ',', default_value = "aa,ps")]
    methods: Vec<Method>,
    /// Comma-separated target densities; empty for none
    #[arg(long, default_value = "0.02,0.05,0.1")]
    densities: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output (default: stdout)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write every generated mask here
    #[arg(long)]
    mask_dir: Option<PathBuf>,
    #[command(flatten)]
    options: MaskOptions,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    density: f64,
    #[arg(long, default_value_t = DEFAULT_PATCH_SIZE)]
    patch_size: usize,
    #[arg(long)]
    levels: Option<String>,
    /// CSV output (default: stdout)
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_levels(list: Option<&str>) -> maskopt::Result<DensityLevels> {
    list.map_or_else(|| Ok(DensityLevels::default()), DensityLevels::parse)
}

fn io_error(path: &Path, e: std::io::Error) -> maskopt::Error {
    maskopt::Error::Io(format!("{}: {e}", path.display()))
}

fn read_image(path: &Path) -> maskopt::Result<Image> {
    load_pnm(&std::fs::read(path).map_err(|e| io_error(path, e))?)
}

fn read_mask(path: &Path) -> maskopt::Result<Mask> {
    load_pbm(&std::fs::read(path).map_err(|e| io_error(path, e))?)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> maskopt::Result<()> {
    std::fs::write(path, bytes).map_err(|e| io_error(path, e))
}

fn write_or_print(path: Option<&Path>, text: &str) -> maskopt::Result<()> {
    match path {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_densities(list: &str) -> maskopt::Result<Vec<f64>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| maskopt::Error::Config(format!("not a density: {s:?}")))
        })
        .collect()
}

fn report(error: &maskopt::Error) {
    let line = serde_json::json!({ "error": error.kind(), "message": error.to_string() });
    eprintln!("{line}");
}

fn run_inpaint(args: &InpaintArgs) -> maskopt::Result<()> {
    let f = read_image(&args.image)?;
    let mask = read_mask(&args.mask)?;
    let (u, _) = inpaint(&f, &mask, &args.solver.config()?)?;
    write(&args.output, save_pnm(&u))
}

fn run_mask(args: &MaskArgs) -> maskopt::Result<()> {
    let settings = args.options.settings()?;
    let f = read_image(&args.image)?;
    let out = methods::generate(&f, args.method, args.density, args.seed, &settings)?;
    write(&args.output, save_pbm(&out.mask))?;
    if let Some(path) = &args.plan_csv {
        let plan = out
            .plan
            .ok_or_else(|| maskopt::Error::Config("--plan-csv needs --method c2f".into()))?;
        write(path, plan.to_csv())?;
    }
    Ok(())
}

fn run_eval(args: &EvalArgs) -> maskopt::Result<()> {
    let f = read_image(&args.image)?;
    let mask = read_mask(&args.mask)?;
    let (u, stats) = inpaint(&f, &mask, &args.solver.config()?)?;
    let mse = metric_mse(&u, &f)?;
    println!("mse,psnr,density,cg_iters");
    println!(
        "{mse:.6},{},{:.6},{}",
        format_psnr(metric_psnr(mse)?),
        mask.density(),
        stats.total_iterations()
    );
    Ok(())
}

fn run_plan(args: &PlanArgs) -> maskopt::Result<()> {
    let f = read_image(&args.image)?;
    let layout = make_layout(f.width(), f.height(), args.patch_size)?;
    let plan = c2f::plan(
        &f,
        args.density,
        &layout,
        &parse_levels(args.levels.as_deref())?,
    )?;
    write_or_print(args.output.as_deref(), &plan.to_csv())
}

fn run_bench(args: &BenchArgs) -> maskopt::Result<bool> {
    let settings = args.options.settings()?;
    let sweep = bench::Sweep {
        images: args.images.clone(),
        densities: parse_densities(&args.densities)?,
        methods: args.methods.clone(),
        seed: args.seed,
        mask_dir: args.mask_dir.clone(),
        // rows already run concurrently, so each c2f call stays single threaded
        settings: MaskSettings {
            workers: 1,
            ..settings
        },
    };
    if let Some(dir) = &sweep.mask_dir {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.options.workers.count()?)
        .build()
        .map_err(|e| maskopt::Error::Config(format!("cannot build worker pool: {e}")))?;
    let rows = bench::run(&sweep, &pool);

    let mut buf = Vec::new();
    bench::write_csv(&rows, &mut buf).map_err(|e| maskopt::Error::Io(e.to_string()))?;
    write_or_print(args.output.as_deref(), &String::from_utf8_lossy(&buf))?;

    let mut failures: Vec<&maskopt::Error> = Vec::new();
    for e in rows.iter().filter_map(|r| r.result.as_ref().err()) {
        if !failures.contains(&e) {
            report(e);
            failures.push(e);
        }
    }
    Ok(failures.is_empty())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let line = serde_json::json!({ "error": "usage", "message": e.to_string().trim_end() });
            eprintln!("{line}");
            return ExitCode::from(2);
        }
        Err(e) => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let result = match &cli.command {
        Command::Inpaint(a) => run_inpaint(a).map(|()| true),
        Command::Mask(a) => run_mask(a).map(|()| true),
        Command::Eval(a) => run_eval(a).map(|()| true),
        Command::Plan(a) => run_plan(a).map(|()| true),
        Command::Bench(a) => run_bench(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            report(&e);
            ExitCode::FAILURE
        }
    }
}
