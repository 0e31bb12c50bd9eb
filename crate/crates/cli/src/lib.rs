//! Command-line pipeline: simulate, process, train, infer and evaluate.
//!
//! Every command reads one [`RunConfig`], applies flag overrides, writes the
//! resolved configuration to `config.resolved.json` in the output directory
//! and then its artifacts. Exit codes: 0 ok, 2 configuration error, 3 runtime
//! or numeric error.

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod config;
pub mod manifest;

pub use config::RunConfig;
pub use manifest::{Entry, Manifest};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "SPARSE_RADAR_THREADS";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<sparse_radar::Error> for CliError {
    fn from(e: sparse_radar::Error) -> Self {
        use sparse_radar::Error as E;
        match e {
            E::Config(_) | E::InvalidGeometry(_) => Self::Config(e.to_string()),
            _ => Self::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "sparse-radar", version, about = "Sparse-array FMCW radar imaging pipeline")]
pub struct Cli {
    /// Run configuration (TOML or JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Unet,
    ReferenceCnn,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Random scenes: input cubes, scene files and enhanced-array ground truth.
    Simulate {
        #[arg(long)]
        n: Option<usize>,
        /// full, sparse6, sparse4 or enhanced
        #[arg(long)]
        array: Option<String>,
    },
    /// Angular cuts of a single-target scene with width and sidelobe level.
    Psf {
        #[arg(long)]
        array: Option<String>,
        /// Comma-separated: das, das_hann, music, matched_filter
        #[arg(long, value_delimiter = ',')]
        estimators: Vec<String>,
        /// Scene file with exactly one target; the configured target otherwise.
        #[arg(long)]
        scene: Option<PathBuf>,
    },
    /// Range-Doppler processing and feature images for every cube.
    Features {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Recomputes ground-truth images from scene files.
    Gt {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Trains the U-Net or the reference CNN on a feature manifest.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Second dataset mixed in at `train.mix_fraction`.
        #[arg(long)]
        mix: Option<PathBuf>,
        #[arg(long)]
        mix_fraction: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, value_enum, default_value = "unet")]
        model: ModelKind,
    },
    /// Network images per Doppler rank and their fusion.
    Infer {
        #[arg(long)]
        weights: PathBuf,
        /// Feature manifest.
        #[arg(long, conflicts_with = "cube")]
        dataset: Option<PathBuf>,
        /// Single input cube.
        #[arg(long)]
        cube: Option<PathBuf>,
        #[arg(long)]
        ranks: Option<usize>,
    },
    /// Tapered delay-and-sum images.
    Das {
        #[arg(long)]
        dataset: PathBuf,
        /// hann or rectangular
        #[arg(long)]
        taper: Option<String>,
    },
    /// Smoothed MUSIC images.
    Music {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Detection metrics of several estimators against the ground truth.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        refcnn_weights: Option<PathBuf>,
        /// Comma-separated: das, das_rect, music, dnn, reference_cnn
        #[arg(long, value_delimiter = ',')]
        estimators: Vec<String>,
    },
    /// Pixelwise maximum of float images.
    Fuse {
        #[arg(required = true, num_args = 1..)]
        images: Vec<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Simulate { .. } => "simulate",
            Self::Psf { .. } => "psf",
            Self::Features { .. } => "features",
            Self::Gt { .. } => "gt",
            Self::Train { .. } => "train",
            Self::Infer { .. } => "infer",
            Self::Das { .. } => "das",
            Self::Music { .. } => "music",
            Self::Evaluate { .. } => "evaluate",
            Self::Fuse { .. } => "fuse",
        }
    }
}

/// Sizes the global thread pool from [`THREADS_ENV`] when set.
pub fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().map_err(|_| CliError::Config(format!("{THREADS_ENV}={v} is not a thread count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    commands::execute(cli.command, cfg, &cli.out)
}
