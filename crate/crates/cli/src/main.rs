//! `modelmap`: build and audit model maps from log-likelihood matrices.

mod commands;
mod input;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use modelmap::bootstrap::Normalization;
use modelmap::sampling::{RowCentering, Weighting};
use modelmap::{Execution, Method};

use crate::input::{Format, NGrid};

#[derive(Parser, Debug)]
#[command(name = "modelmap", version, about = "Model maps from log-likelihood matrices")]
pub struct Cli {
    /// Base seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for parallel loops (0 = rayon default).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    /// Write the result here instead of stdout.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Log-likelihood matrix, delimited text or MMAP1 binary.
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(long, default_value = "auto")]
    pub format: Format,
    /// Clip entries below this lower percentile (0-100) before centering.
    #[arg(long, conflicts_with = "threshold")]
    pub clip_pct: Option<f64>,
    /// Clip entries below this fixed value before centering.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// The input is already doubly centered.
    #[arg(long, conflicts_with_all = ["clip_pct", "threshold"])]
    pub centered: bool,
}

#[derive(Args, Debug, Clone)]
pub struct CenteringArgs {
    #[arg(long, default_value = "weighted")]
    pub weighting: Weighting,
    #[arg(long, default_value = "self-normalized")]
    pub row_centering: RowCentering,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Clip and double-center a matrix; emits Q.
    Center {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Resampling probabilities of one method.
    Plan {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "uniform")]
        method: Method,
    },
    /// One resample of n texts.
    Sample {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "uniform")]
        method: Method,
        #[arg(short, long)]
        n: usize,
    },
    /// Exact distances, or weighted distances from one resample when --n is given.
    Distances {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "uniform")]
        method: Method,
        #[arg(short, long)]
        n: Option<usize>,
        /// Emit KL estimates g / (2N) instead of g.
        #[arg(long)]
        kl: bool,
        #[command(flatten)]
        centering: CenteringArgs,
    },
    /// Bootstrap error sweep over an n grid.
    Error {
        #[command(flatten)]
        input: InputArgs,
        /// Methods to sweep; repeat or separate with commas. Default: all.
        #[arg(long, value_delimiter = ',')]
        method: Vec<Method>,
        /// `a:b` (built-in grid points in [a, b]) or a comma list.
        #[arg(long, default_value = "10:10000")]
        n_grid: NGrid,
        #[arg(short = 'R', long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        replicates: u64,
        #[arg(long, default_value_t = 1e-3)]
        epsilon0: f64,
        #[arg(long, default_value = "relative")]
        normalization: Normalization,
        #[command(flatten)]
        centering: CenteringArgs,
    },
    /// Smallest n whose population error matches the sampling error at m texts.
    MinN {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_delimiter = ',')]
        method: Vec<Method>,
        #[arg(short, long)]
        m: usize,
        #[arg(long, default_value = "10:10000")]
        n_grid: NGrid,
        #[arg(short = 'R', long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        replicates: u64,
        #[arg(long, default_value_t = 1e-3)]
        epsilon0: f64,
        #[arg(long, default_value = "relative")]
        normalization: Normalization,
        #[command(flatten)]
        centering: CenteringArgs,
    },
    /// Procrustes-align per-trial 2-D maps and summarize each model by an ellipse.
    Align {
        /// Trial coordinates with header `trial_id,model_id,x,y`. The first trial is the reference.
        #[arg(long, conflicts_with = "input")]
        trials: Option<PathBuf>,
        /// Build trials by PCA of resampled coordinates of this matrix.
        #[arg(short, long)]
        input: Option<PathBuf>,
        #[arg(long, default_value = "auto")]
        format: Format,
        #[arg(long)]
        clip_pct: Option<f64>,
        #[arg(long, default_value = "uniform")]
        method: Method,
        #[arg(short, long, default_value_t = 100)]
        n: usize,
        #[arg(short = 'R', long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(2..))]
        replicates: u64,
        #[command(flatten)]
        centering: CenteringArgs,
    },
    /// Place new models on an existing resampled map.
    AddModels {
        #[command(flatten)]
        input: InputArgs,
        /// Log-likelihoods of the new models on the same texts.
        #[arg(long)]
        new: PathBuf,
        #[arg(long, default_value = "uniform")]
        method: Method,
        #[arg(short, long)]
        n: usize,
        /// Emit the weighted distance matrix instead of coordinates.
        #[arg(long)]
        distances: bool,
        #[command(flatten)]
        centering: CenteringArgs,
    },
    /// Ridge prediction of downstream scores with grouped nested cross-validation.
    Predict {
        #[command(flatten)]
        input: InputArgs,
        /// Score table with header `model_id,group,<tasks...>`.
        #[arg(long)]
        scores: PathBuf,
        /// Tasks to predict; default all.
        #[arg(long, value_delimiter = ',')]
        task: Vec<String>,
        /// `benchmark` (alpha 1e1..1e9, clipped to [0, 100]) or `log-likelihood` (alpha 1e-4..1e4).
        #[arg(long, default_value = "benchmark")]
        target: input::Target,
        #[arg(long, default_value = "uniform")]
        method: Method,
        #[arg(short, long)]
        n: usize,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
        seeds: u64,
        #[arg(long, default_value_t = 5)]
        outer_folds: usize,
        #[arg(long, default_value_t = 5)]
        inner_folds: usize,
        #[command(flatten)]
        centering: CenteringArgs,
    },
    /// Run the built-in oracle checks.
    Verify,
}

pub enum Failure {
    Usage(String),
    Data(String),
    Verification,
}

impl From<modelmap::Error> for Failure {
    fn from(e: modelmap::Error) -> Self {
        match e {
            modelmap::Error::InvalidArgument(msg) => Failure::Usage(msg),
            other => Failure::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    match commands::run(&cli, exec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Verification) => ExitCode::from(4),
    }
}
