//! `qkc` command-line harness.

mod commands;
mod manifest;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qkc::quantum_kernel::EncodingMode;
use qkc::{Axis, FeatureVariant, Mode};

use settings::{EstimatorKind, KernelKind, Settings};

#[derive(Debug)]
pub enum CliError {
    BadArgs(String),
    MissingData(String),
    Core(qkc::Error),
}

impl CliError {
    pub fn bad(e: qkc::Error) -> Self {
        CliError::BadArgs(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::BadArgs(_) | CliError::Core(qkc::Error::Config(_)) => 2,
            CliError::Core(qkc::Error::Diverged { .. }) => 3,
            CliError::MissingData(_) => 4,
            CliError::Core(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::BadArgs(m) => write!(f, "bad arguments: {m}"),
            CliError::MissingData(m) => write!(f, "missing data: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<qkc::Error> for CliError {
    fn from(e: qkc::Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "qkc",
    version,
    about = "Quantum kernel-correlation registration experiments"
)]
struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// JSON file with default settings (CLI flags take precedence).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct ModelFlags {
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long, value_enum)]
    kernel: Option<KernelKind>,
    /// Gaussian kernel bandwidth sigma^2.
    #[arg(long)]
    sigma2: Option<f64>,
    /// Quantum feature map: coyle | havlicek.
    #[arg(long)]
    variant: Option<FeatureVariant>,
    /// Quantum encoding: binned | continuous.
    #[arg(long)]
    encoding: Option<EncodingMode>,
    /// Bits per axis for the binned quantum encoding.
    #[arg(long)]
    bits: Option<usize>,
    /// Rotation axis for 3D data: x | y | z.
    #[arg(long)]
    axis: Option<Axis>,
}

#[derive(Args, Debug, Default)]
struct TrainFlags {
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    decay_every: Option<usize>,
    #[arg(long)]
    decay_factor: Option<f64>,
    /// exact | sampled
    #[arg(long)]
    mode: Option<Mode>,
}

#[derive(Args, Debug, Default)]
struct DataFlags {
    /// Use the fish shape (from --data, or the synthetic fallback).
    #[arg(long)]
    fish: bool,
    /// Point-set file (CSV, JSON or OFF).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Regular polygon with this many sides, 10 points per side.
    #[arg(long)]
    polygon: Option<usize>,
    /// Allow the built-in fish-like curve when no fish file is given.
    #[arg(long)]
    synthetic_fallback: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a Born machine on a model/scene pair.
    Train {
        model: PathBuf,
        scene: PathBuf,
        #[command(flatten)]
        model_flags: ModelFlags,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Estimate the rigid transform taking the model onto the scene.
    Register {
        model: PathBuf,
        scene: PathBuf,
        #[command(flatten)]
        model_flags: ModelFlags,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Kernel correlation as a function of rotation angle.
    SweepKc {
        shape: PathBuf,
        /// Scene to correlate against (default: the shape itself).
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Uniform grid size instead of the bin medians.
        #[arg(long)]
        grid: Option<usize>,
        #[command(flatten)]
        model_flags: ModelFlags,
    },
    /// Rotation sweep with alignment error and transform discrepancy.
    Benchmark {
        #[command(flatten)]
        data: DataFlags,
        /// bins | uniform:K
        #[arg(long)]
        sweep: Option<String>,
        #[command(flatten)]
        model_flags: ModelFlags,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Mean alignment error against outlier ratio.
    Noise {
        #[command(flatten)]
        data: DataFlags,
        /// Comma-separated outlier ratios in [0, 0.5].
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
        #[arg(long)]
        runs: Option<usize>,
        /// Outlier spread as a fraction of the shape radius.
        #[arg(long)]
        sigma_noise: Option<f64>,
        #[command(flatten)]
        model_flags: ModelFlags,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Quantum-kernel Gram matrix of a point set.
    Gram {
        points: PathBuf,
        /// Second point set for a cross Gram matrix.
        #[arg(long)]
        others: Option<PathBuf>,
        #[arg(long, value_enum)]
        estimator: Option<EstimatorKind>,
        #[arg(long)]
        shots: Option<u64>,
        /// Move the points into the unit cube before encoding.
        #[arg(long)]
        unit_cube: bool,
        #[command(flatten)]
        model_flags: ModelFlags,
    },
}

macro_rules! overlay {
    ($settings:expr, $flags:expr, $($field:ident),+) => {
        $(if let Some(v) = $flags.$field.clone() { $settings.$field = v.into(); })+
    };
}

impl ModelFlags {
    fn apply(&self, s: &mut Settings) {
        overlay!(s, self, qubits, kernel, variant, encoding, bits);
        if self.sigma2.is_some() {
            s.sigma2 = self.sigma2;
        }
        if self.axis.is_some() {
            s.axis = self.axis;
        }
    }
}

impl TrainFlags {
    fn apply(&self, s: &mut Settings) {
        overlay!(s, self, iters, batch, lr, decay_every, decay_factor, mode);
    }
}

fn resolve(cli: &Cli) -> Result<Settings, CliError> {
    let mut s = Settings::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if cli.threads.is_some() {
        s.threads = cli.threads;
    }
    match &cli.command {
        Command::Train {
            model_flags, train, ..
        }
        | Command::Register {
            model_flags, train, ..
        } => {
            model_flags.apply(&mut s);
            train.apply(&mut s);
        }
        Command::SweepKc {
            model_flags, grid, ..
        } => {
            model_flags.apply(&mut s);
            if grid.is_some() {
                s.grid = *grid;
            }
        }
        Command::Benchmark {
            model_flags,
            train,
            sweep,
            ..
        } => {
            model_flags.apply(&mut s);
            train.apply(&mut s);
            if let Some(sw) = sweep {
                s.sweep = sw.clone();
            }
        }
        Command::Noise {
            model_flags,
            train,
            ratios,
            runs,
            sigma_noise,
            ..
        } => {
            model_flags.apply(&mut s);
            train.apply(&mut s);
            if let Some(r) = ratios {
                s.ratios = r.clone();
            }
            if let Some(r) = runs {
                s.runs = *r;
            }
            if let Some(v) = sigma_noise {
                s.sigma_noise = *v;
            }
        }
        Command::Gram {
            model_flags,
            estimator,
            shots,
            ..
        } => {
            model_flags.apply(&mut s);
            if let Some(e) = estimator {
                s.estimator = *e;
            }
            if let Some(n) = shots {
                s.shots = *n;
            }
        }
    }
    Ok(s)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let settings = resolve(&cli)?;
    settings.training().validate().map_err(CliError::bad)?;
    if let Some(n) = settings.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::BadArgs(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| qkc::Error::io(&cli.out, e))?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::Train { model, scene, .. } => commands::train(model, scene, &settings, out, false),
        Command::Register { model, scene, .. } => {
            commands::train(model, scene, &settings, out, true)
        }
        Command::SweepKc { shape, scene, .. } => {
            commands::sweep_kc(shape, scene.as_deref(), &settings, out)
        }
        Command::Benchmark { data, .. } => commands::benchmark(&data.source()?, &settings, out),
        Command::Noise { data, .. } => commands::noise(&data.source()?, &settings, out),
        Command::Gram {
            points,
            others,
            unit_cube,
            ..
        } => commands::gram(points, others.as_deref(), *unit_cube, &settings, out),
    }
}

impl DataFlags {
    fn source(&self) -> Result<commands::Source, CliError> {
        match (&self.data, self.polygon, self.fish) {
            (Some(path), None, _) => Ok(commands::Source::File(path.clone())),
            (None, Some(sides), false) => Ok(commands::Source::Polygon(sides)),
            (None, None, true) if self.synthetic_fallback => Ok(commands::Source::FishFallback),
            (None, None, true) => Err(CliError::MissingData(
                "no fish point file given; pass --data PATH or --synthetic-fallback".into(),
            )),
            (None, None, false) => Err(CliError::BadArgs(
                "choose a shape with --fish, --data or --polygon".into(),
            )),
            _ => Err(CliError::BadArgs(
                "--polygon cannot be combined with --data or --fish".into(),
            )),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qkc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
