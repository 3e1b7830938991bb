//! The `gsvol` command-line tool.
//!
//! Each subcommand resolves a JSON configuration (file given by `--config`,
//! then flag overrides), performs its work and writes a [`RunManifest`] next
//! to its primary output. Exit codes: 0 success, 2 usage, 3 data or format
//! error, 4 numerical failure.

pub mod bench;
mod manifest;
pub mod pgm;

pub use manifest::{load_config_value, machine_info, manifest_path, RunManifest, VERSION};

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::Error;
use crate::exec::Executor;
use crate::field::{load_field, save_field, InitConfig};
use crate::gradcheck::{run_gradcheck, GradcheckConfig, ParamClass};
use crate::metrics::evaluate;
use crate::optimize::{fit_with, FitConfig, LossKind};
use crate::raster::Rasterizer;
use crate::render::{render_naive, Precision, RenderOptions};
use crate::volume::{
    generate_phantom, load_volume, resample_trilinear, save_volume, GridSpec, Phantom, PhantomKind, Volume,
    VolumeFormat,
};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(Error),
    /// The command ran but its check failed.
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Check(_) => EXIT_NUMERICAL,
            CliError::Lib(e) => match e {
                Error::Config(_) | Error::InvalidGrid(_) | Error::ThreadPool(_) => EXIT_USAGE,
                Error::NonFiniteLoss { .. } | Error::NonFiniteGradient { .. } => EXIT_NUMERICAL,
                _ => EXIT_DATA,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn parse_triple<T: FromStr>(s: &str) -> std::result::Result<[T; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated values, got '{s}'"));
    }
    let mut out = Vec::with_capacity(3);
    for p in parts {
        out.push(p.parse::<T>().map_err(|_| format!("cannot parse '{p}'"))?);
    }
    let mut it = out.into_iter();
    Ok([it.next().unwrap(), it.next().unwrap(), it.next().unwrap()])
}

fn parse_dims(s: &str) -> std::result::Result<[usize; 3], String> {
    let d = parse_triple::<usize>(s)?;
    if d.contains(&0) {
        return Err(format!("dims must be >= 1, got '{s}'"));
    }
    Ok(d)
}

fn parse_vec3(s: &str) -> std::result::Result<[f64; 3], String> {
    parse_triple::<f64>(s)
}

#[derive(Debug, Parser)]
#[command(name = "gsvol", version, about = "Zero-shot volumetric super-resolution with 3D Gaussian fields")]
pub struct Cli {
    /// Worker threads (falls back to GSVOL_THREADS, then all cores; 1 = serial).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic phantom volume.
    Phantom(PhantomArgs),
    /// Downsample a volume with trilinear interpolation.
    Degrade(DegradeArgs),
    /// Fit a Gaussian field to one low-resolution volume.
    Fit(FitArgs),
    /// Render a field on an arbitrary grid.
    Render(RenderArgs),
    /// Compare a prediction with a reference volume.
    Eval(EvalArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Time the brick rasterizer against the brute-force renderer.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Ellipsoids,
    GaussianMixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    #[default]
    Brick,
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    F32,
    F64,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::F32 => Precision::F32,
            PrecisionArg::F64 => Precision::F64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    L1,
    L2,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<[usize; 3]>,
    #[arg(long, value_parser = parse_vec3)]
    pub spacing: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_vec3)]
    pub origin: Option<[f64; 3]>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of ellipsoids or mixture components.
    #[arg(long)]
    pub components: Option<usize>,
    /// Gaussian smoothing in voxels.
    #[arg(long)]
    pub smooth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomConfig {
    pub kind: PhantomKind,
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    pub seed: u64,
    pub components: usize,
    pub smooth: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            kind: PhantomKind::Ellipsoids,
            dims: [64, 64, 64],
            spacing: [1.0; 3],
            origin: [0.0; 3],
            seed: 0,
            components: 8,
            smooth: 1.0,
        }
    }
}

#[derive(Debug, Args)]
pub struct DegradeArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Integer downsampling factor shared by all axes.
    #[arg(long, conflicts_with = "target_dims")]
    pub factor: Option<usize>,
    /// Explicit output dims; the world extent is preserved.
    #[arg(long, value_parser = parse_dims)]
    pub target_dims: Option<[usize; 3]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegradeConfig {
    pub factor: Option<usize>,
    pub target_dims: Option<[usize; 3]>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Low-resolution input volume; the only data the fit sees.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Output GSV1 field.
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Per-iteration report (JSON lines); defaults to `<out>.report.jsonl`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr_position: Option<f64>,
    #[arg(long)]
    pub lr_scale: Option<f64>,
    #[arg(long)]
    pub lr_rotation: Option<f64>,
    #[arg(long)]
    pub lr_amplitude: Option<f64>,
    #[arg(long)]
    pub lr_relax: Option<f64>,
    #[arg(long)]
    pub background_threshold: Option<f64>,
    #[arg(long)]
    pub scale_factor: Option<f64>,
    #[arg(long)]
    pub position_jitter: Option<f64>,
    #[arg(long)]
    pub disable_amplitude: bool,
    #[arg(long)]
    pub disable_relax: bool,
    #[arg(long, value_enum)]
    pub precision: Option<PrecisionArg>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    #[arg(long)]
    pub checkpoint_dir: Option<PathBuf>,
    /// Faster gradient reduction without bit-reproducibility.
    #[arg(long)]
    pub nondeterministic: bool,
    /// Print the loss every this many iterations (0 = quiet).
    #[arg(long, default_value_t = 100)]
    pub log_every: usize,
    /// Rejected: fitting never reads a high-resolution reference.
    #[arg(long, hide = true, aliases = ["hr", "ground-truth"])]
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitCommandConfig {
    pub init: InitConfig,
    pub fit: FitConfig,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long, short)]
    pub field: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<[usize; 3]>,
    #[arg(long, value_parser = parse_vec3)]
    pub spacing: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_vec3)]
    pub origin: Option<[f64; 3]>,
    /// Copy the grid of an existing volume.
    #[arg(long, conflicts_with_all = ["dims", "spacing", "origin"])]
    pub like: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub engine: Option<Engine>,
    #[arg(long, value_enum)]
    pub precision: Option<PrecisionArg>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub dims: Option<[usize; 3]>,
    pub spacing: Option<[f64; 3]>,
    pub origin: Option<[f64; 3]>,
    pub engine: Engine,
    pub render: RenderOptions,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Metric report (JSON).
    #[arg(long, short)]
    pub out: PathBuf,
    /// Directory for midplane slice images of the prediction.
    #[arg(long)]
    pub slices: Option<PathBuf>,
    /// Directory for midplane absolute-error images.
    #[arg(long)]
    pub error_maps: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, short, default_value = "gradcheck.json")]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub gaussians: Option<usize>,
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<[usize; 3]>,
    #[arg(long, value_enum)]
    pub precision: Option<PrecisionArg>,
    /// Comma-separated subset of amplitude,relax,position,scale,rotation.
    #[arg(long, value_delimiter = ',')]
    pub params: Option<Vec<String>>,
    #[arg(long)]
    pub step: Option<f64>,
    /// Disable the Mahalanobis cutoff so that no parameter is skipped.
    #[arg(long)]
    pub untruncated: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, short, default_value = "bench.json")]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub gaussians: Option<usize>,
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<[usize; 3]>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn base_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let v = load_config_value(p)?;
            serde_json::from_value(v).map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))
        }
    }
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).unwrap_or(Value::Null)
}

fn read_volume(p: &Path) -> CliResult<Volume> {
    Ok(load_volume(p, VolumeFormat::from_path(p)?)?)
}

fn write_volume(v: &Volume, p: &Path) -> CliResult<()> {
    let fmt = VolumeFormat::from_path(p).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(save_volume(v, p, fmt)?)
}

fn write_json<T: Serialize>(t: &T, p: &Path) -> CliResult<()> {
    let s = serde_json::to_string_pretty(t).map_err(Error::from)?;
    std::fs::write(p, s).map_err(|e| Error::io(p, e))?;
    Ok(())
}

fn finish(mut m: RunManifest, primary: &Path, start: Instant) -> CliResult<()> {
    m.wall_time = start.elapsed().as_secs_f64();
    m.write(&manifest_path(primary))?;
    Ok(())
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("gsvol: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let start = Instant::now();
    match cli.command {
        Command::Bench(a) => cmd_bench(a, cli.threads, start),
        cmd => {
            let exec = Executor::from_request(cli.threads)?;
            match cmd {
                Command::Phantom(a) => cmd_phantom(a, &exec, start),
                Command::Degrade(a) => cmd_degrade(a, &exec, start),
                Command::Fit(a) => cmd_fit(a, &exec, start),
                Command::Render(a) => cmd_render(a, &exec, start),
                Command::Eval(a) => cmd_eval(a, &exec, start),
                Command::Gradcheck(a) => cmd_gradcheck(a, &exec, start),
                Command::Bench(_) => unreachable!(),
            }
        }
    }
}

fn cmd_phantom(a: PhantomArgs, exec: &Executor, start: Instant) -> CliResult<()> {
    let mut c: PhantomConfig = base_config(a.config.as_deref())?;
    if let Some(k) = a.kind {
        c.kind = match k {
            KindArg::Ellipsoids => PhantomKind::Ellipsoids,
            KindArg::GaussianMixture => PhantomKind::GaussianMixture,
        };
    }
    c.dims = a.dims.unwrap_or(c.dims);
    c.spacing = a.spacing.unwrap_or(c.spacing);
    c.origin = a.origin.unwrap_or(c.origin);
    c.seed = a.seed.unwrap_or(c.seed);
    c.components = a.components.unwrap_or(c.components);
    c.smooth = a.smooth.unwrap_or(c.smooth);

    let grid = GridSpec::new(c.dims, c.spacing, c.origin).map_err(|e| CliError::Usage(e.to_string()))?;
    if !(c.smooth >= 0.0) {
        return Err(CliError::Usage(format!("smooth must be >= 0, got {}", c.smooth)));
    }
    let ph = match c.kind {
        PhantomKind::Ellipsoids => Phantom::random_ellipsoids(&grid, c.components, c.seed),
        PhantomKind::GaussianMixture => Phantom::random_gaussian_mixture(&grid, c.components, c.seed),
    };
    let v = generate_phantom(&ph, &grid, c.smooth);
    write_volume(&v, &a.out)?;

    let mut m = RunManifest::new("phantom", to_value(&c), exec.threads()).output("volume", &a.out);
    m.seed = Some(c.seed);
    m.extra = json!({ "grid": grid, "components": ph.primitives.len(), "phantom": ph });
    finish(m, &a.out, start)
}

fn cmd_degrade(a: DegradeArgs, exec: &Executor, start: Instant) -> CliResult<()> {
    let mut c: DegradeConfig = base_config(a.config.as_deref())?;
    if a.factor.is_some() || a.target_dims.is_some() {
        c.factor = a.factor;
        c.target_dims = a.target_dims;
    }
    let src = read_volume(&a.input)?;
    let target = match (c.factor, c.target_dims) {
        (Some(_), Some(_)) => return Err(CliError::Usage("give either a factor or target dims, not both".into())),
        (None, None) => return Err(CliError::Usage("degrade needs --factor or --target-dims".into())),
        (Some(0), None) => return Err(CliError::Usage("factor must be >= 1".into())),
        (Some(f), None) => src.grid().downsampled(f)?,
        (None, Some(d)) => {
            if (0..3).any(|i| d[i] > src.dims()[i]) {
                return Err(CliError::Usage(format!(
                    "target dims {d:?} exceed source dims {:?}; degrade only shrinks",
                    src.dims()
                )));
            }
            src.grid().with_dims_same_extent(d)?
        }
    };
    let out = if target == *src.grid() {
        src.clone()
    } else {
        resample_trilinear(&src, &target)
    };
    write_volume(&out, &a.out)?;

    let mut m = RunManifest::new("degrade", to_value(&c), exec.threads())
        .input("volume", &a.input)
        .output("volume", &a.out);
    m.extra = json!({ "source_grid": src.grid(), "target_grid": target });
    finish(m, &a.out, start)
}

fn resolve_fit_config(a: &FitArgs) -> CliResult<FitCommandConfig> {
    let mut c: FitCommandConfig = base_config(a.config.as_deref())?;
    let f = &mut c.fit;
    f.iterations = a.iterations.unwrap_or(f.iterations);
    if let Some(l) = a.loss {
        f.loss = match l {
            LossArg::L1 => LossKind::L1,
            LossArg::L2 => LossKind::L2,
        };
    }
    if a.lr_position.is_some() {
        f.lr_position = a.lr_position;
    }
    f.lr_scale = a.lr_scale.unwrap_or(f.lr_scale);
    f.lr_rotation = a.lr_rotation.unwrap_or(f.lr_rotation);
    f.lr_amplitude = a.lr_amplitude.unwrap_or(f.lr_amplitude);
    f.lr_relax = a.lr_relax.unwrap_or(f.lr_relax);
    if a.disable_amplitude {
        f.amplitude_enabled = false;
    }
    if a.disable_relax {
        f.relax_enabled = false;
    }
    if let Some(p) = a.precision {
        f.raster.render.precision = p.into();
    }
    f.checkpoint_every = a.checkpoint_every.unwrap_or(f.checkpoint_every);
    if a.checkpoint_dir.is_some() {
        f.checkpoint_dir = a.checkpoint_dir.clone();
    }
    if a.nondeterministic {
        f.raster.deterministic = false;
    }
    let i = &mut c.init;
    i.seed = a.seed.unwrap_or(i.seed);
    i.background_threshold = a.background_threshold.unwrap_or(i.background_threshold);
    i.scale_factor = a.scale_factor.unwrap_or(i.scale_factor);
    i.position_jitter = a.position_jitter.unwrap_or(i.position_jitter);
    c.fit.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    c.init.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(c)
}

fn cmd_fit(a: FitArgs, exec: &Executor, start: Instant) -> CliResult<()> {
    if a.reference.is_some() {
        return Err(CliError::Usage(
            "fit is zero-shot: it only reads the low-resolution input; evaluate against a reference with `eval`".into(),
        ));
    }
    let c = resolve_fit_config(&a)?;
    let lr = read_volume(&a.input)?;
    let log_every = a.log_every;
    let (field, report) = fit_with(&lr, &c.init, &c.fit, exec, |r| {
        if log_every > 0 && r.iteration % log_every == 0 {
            eprintln!("iter {:>6}  loss {:.6e}  {:.1}s", r.iteration, r.loss, r.wall_time);
        }
    })?;
    save_field(&field, &a.out)?;
    let report_path = a.report.clone().unwrap_or_else(|| {
        let mut s = a.out.as_os_str().to_owned();
        s.push(".report.jsonl");
        PathBuf::from(s)
    });
    report.write_jsonl(&report_path)?;
    eprintln!(
        "fitted {} Gaussians, final loss {:.6e} in {:.1}s",
        report.gaussians, report.final_loss, report.total_time
    );

    let mut m = RunManifest::new("fit", to_value(&c), exec.threads())
        .input("lr_volume", &a.input)
        .output("field", &a.out)
        .output("report", &report_path);
    m.seed = Some(c.init.seed);
    m.extra = json!({
        "lr_grid": lr.grid(),
        "gaussians": report.gaussians,
        "final_loss": report.final_loss,
        "flags": field.flags(),
        "checkpoints": report.checkpoints,
    });
    finish(m, &a.out, start)
}

/// Grid of the volume a field was fitted to, from the fit manifest.
fn fitted_grid(field_path: &Path) -> Option<GridSpec> {
    let m = RunManifest::read(&manifest_path(field_path)).ok()?;
    serde_json::from_value(m.extra.get("lr_grid")?.clone()).ok()
}

fn cmd_render(a: RenderArgs, exec: &Executor, start: Instant) -> CliResult<()> {
    let mut c: RenderConfig = base_config(a.config.as_deref())?;
    if a.dims.is_some() || a.like.is_some() {
        c.dims = a.dims;
    }
    if a.spacing.is_some() {
        c.spacing = a.spacing;
    }
    if a.origin.is_some() {
        c.origin = a.origin;
    }
    c.engine = a.engine.unwrap_or(c.engine);
    if let Some(p) = a.precision {
        c.render.precision = p.into();
    }

    let field = load_field(&a.field)?;
    let grid = if let Some(like) = &a.like {
        read_volume(like)?.grid().clone()
    } else {
        let fitted = fitted_grid(&a.field);
        match (c.dims, c.spacing, c.origin) {
            (Some(d), Some(s), o) => GridSpec::new(d, s, o.unwrap_or([0.0; 3])),
            (d, None, None) => {
                let base = fitted.ok_or_else(|| {
                    CliError::Usage(format!(
                        "no fit manifest next to {}; give --dims with --spacing/--origin or --like",
                        a.field.display()
                    ))
                })?;
                match d {
                    Some(d) => base.with_dims_same_extent(d),
                    None => Ok(base),
                }
            }
            _ => return Err(CliError::Usage("--spacing/--origin need --dims and --spacing".into())),
        }
        .map_err(|e| CliError::Usage(e.to_string()))?
    };

    let out = match c.engine {
        Engine::Brick => {
            let rast = Rasterizer::new(
                crate::raster::RasterOptions {
                    render: c.render,
                    ..Default::default()
                },
                exec.clone(),
            )
            .map_err(|e| CliError::Usage(e.to_string()))?;
            rast.render(&field, &grid)?
        }
        Engine::Naive => render_naive(&field, &grid, &c.render, exec)?,
    };
    write_volume(&out, &a.out)?;

    let mut m = RunManifest::new("render", to_value(&c), exec.threads())
        .input("field", &a.field)
        .output("volume", &a.out);
    if let Some(l) = &a.like {
        m = m.input("like", l);
    }
    m.extra = json!({ "grid": grid });
    finish(m, &a.out, start)
}

fn cmd_eval(a: EvalArgs, exec: &Executor, start: Instant) -> CliResult<()> {
    let pred = read_volume(&a.pred)?;
    let reference = read_volume(&a.reference)?;
    let report = evaluate(&pred, &reference)?;
    write_json(&report, &a.out)?;
    println!("{}", serde_json::to_string(&json!({ "psnr": report.psnr, "ssim": report.ssim })).unwrap());

    let mut m = RunManifest::new(
        "eval",
        json!({ "slices": a.slices, "error_maps": a.error_maps }),
        exec.threads(),
    )
    .input("pred", &a.pred)
    .input("ref", &a.reference)
    .output("report", &a.out);
    if let Some(dir) = &a.slices {
        for (i, p) in pgm::write_slices(&pred, dir)?.iter().enumerate() {
            m = m.output(&format!("slice_{i}"), p);
        }
    }
    if let Some(dir) = &a.error_maps {
        for (i, p) in pgm::write_error_maps(&pred, &reference, dir)?.iter().enumerate() {
            m = m.output(&format!("error_map_{i}"), p);
        }
    }
    finish(m, &a.out, start)
}

fn cmd_gradcheck(a: GradcheckArgs, exec: &Executor, start: Instant) -> CliResult<()> {
    let mut c: GradcheckConfig = base_config(a.config.as_deref())?;
    c.seed = a.seed.unwrap_or(c.seed);
    c.gaussians = a.gaussians.unwrap_or(c.gaussians);
    c.dims = a.dims.unwrap_or(c.dims);
    c.step = a.step.unwrap_or(c.step);
    if let Some(p) = a.precision {
        c.precision = p.into();
    }
    if let Some(list) = &a.params {
        c.params = list
            .iter()
            .map(|s| s.parse::<ParamClass>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if a.untruncated {
        c.cutoff_sigma = f64::INFINITY;
    }
    let report = run_gradcheck(&c, exec).map_err(|e| match e {
        Error::Config(m) => CliError::Usage(m),
        e => CliError::Lib(e),
    })?;
    println!("relative error tolerance {:e}", report.tolerance);
    for r in &report.classes {
        println!(
            "{:<10} max_rel_error {:.3e}  checked {:>4}  skipped {:>3}  {}",
            r.class.to_string(),
            r.max_rel_error,
            r.checked,
            r.skipped,
            if r.max_rel_error <= report.tolerance { "ok" } else { "FAIL" }
        );
    }
    write_json(&report, &a.out)?;
    let mut m = RunManifest::new("gradcheck", to_value(&c), exec.threads()).output("report", &a.out);
    m.seed = Some(c.seed);
    m.extra = json!({ "passed": report.passed() });
    finish(m, &a.out, start)?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Check("gradient mismatch above tolerance".into()))
    }
}

fn cmd_bench(a: BenchArgs, threads: Option<usize>, start: Instant) -> CliResult<()> {
    let mut c: bench::BenchConfig = base_config(a.config.as_deref())?;
    c.threads = threads.unwrap_or(c.threads);
    c.gaussians = a.gaussians.unwrap_or(c.gaussians);
    c.dims = a.dims.unwrap_or(c.dims);
    c.repeats = a.repeats.unwrap_or(c.repeats);
    c.seed = a.seed.unwrap_or(c.seed);
    let r = bench::run_bench(&c)?;
    println!(
        "N={} grid={:?} threads={}: index {:.3}s, brick forward {:.3}s, naive {:.3}s, speedup {:.1}x",
        r.gaussians, r.dims, r.threads, r.index_seconds, r.brick_forward_seconds, r.naive_seconds, r.speedup
    );
    write_json(&r, &a.out)?;
    let mut m = RunManifest::new("bench", to_value(&c), r.threads).output("report", &a.out);
    m.seed = Some(c.seed);
    m.extra = json!({ "machine": machine_info(), "result": r });
    finish(m, &a.out, start)
}
