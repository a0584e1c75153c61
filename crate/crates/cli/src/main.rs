mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gazelab_core::analysis::{
    CleanMethod, DEFAULT_KDE_BANDWIDTH, DEFAULT_MAD_K, DEFAULT_MEDIAN_KERNEL,
};
use gazelab_core::Error;

/// Gaze error analysis: synthesize or load sessions, clean, describe,
/// augment, build features, classify operating conditions and fit
/// gaze-error regressions.
///
/// Any long flag can also be set in a key=value file passed with --config;
/// flags given on the command line win.
#[derive(Parser, Debug)]
#[command(name = "gazelab", version)]
pub struct Cli {
    /// key=value file with defaults for the subcommand's flags
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write deterministic synthetic sessions to <out>/sessions
    Synth(SynthArgs),
    /// Fill gaps and remove outliers, writing cleaned session CSVs
    Clean(CleanArgs),
    /// Descriptive statistics, KDE curves and spatial error maps
    Stats(StatsArgs),
    /// Write the ten augmented error series of each session
    Augment(AugmentArgs),
    /// Assemble the labeled feature matrix of a classification task
    Features(FeaturesArgs),
    /// Two-dimensional t-SNE embedding of a feature matrix
    Tsne(TsneArgs),
    /// Cross-validate a classifier and save a model fit on all rows
    Train(TrainArgs),
    /// Apply a saved classifier to a feature matrix
    Evaluate(EvaluateArgs),
    /// Fit a gaze-error regression for one condition
    Regress(RegressArgs),
    /// Collect existing outputs into <out>/report.md
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Base seed for every random stream
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Also write SVG plots
    #[arg(long)]
    pub plot: bool,
}

#[derive(Args, Debug, Clone)]
pub struct Cleaning {
    /// Outlier handling: median, mad, iqr or none
    #[arg(long, default_value = "median")]
    pub method: String,
    /// Median filter width (odd)
    #[arg(long, default_value_t = DEFAULT_MEDIAN_KERNEL)]
    pub kernel: usize,
    /// MAD multiplier for the mad method
    #[arg(long, default_value_t = DEFAULT_MAD_K)]
    pub mad_k: f64,
}

impl Cleaning {
    pub fn method(&self) -> gazelab_core::Result<CleanMethod> {
        CleanMethod::from_parts(&self.method, self.kernel, self.mad_k)
    }
}

#[derive(Args, Debug, Clone)]
pub struct Inputs {
    /// Session files, directories of CSVs or glob patterns [default: <out>/sessions]
    #[arg(long, num_args = 1..)]
    pub input: Vec<String>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// desktop or tablet
    #[arg(long, default_value = "desktop")]
    pub platform: String,
    /// Comma-separated conditions [default: all conditions of the platform]
    #[arg(long, value_delimiter = ',')]
    pub conditions: Vec<String>,
    #[arg(long, default_value_t = 20)]
    pub participants: usize,
    /// Samples recorded at each AOI
    #[arg(long, default_value_t = 41)]
    pub samples_per_aoi: usize,
    /// Fraction of eye samples dropped as missing
    #[arg(long, default_value_t = 0.0)]
    pub missing_frac: f64,
}

#[derive(Args, Debug)]
pub struct CleanArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub cleaning: Cleaning,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub cleaning: Cleaning,
    /// KDE bandwidth in degrees
    #[arg(long, default_value_t = DEFAULT_KDE_BANDWIDTH)]
    pub bandwidth: f64,
    /// KDE evaluation points
    #[arg(long, default_value_t = 200)]
    pub kde_points: usize,
}

#[derive(Args, Debug)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub cleaning: Cleaning,
}

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub cleaning: Cleaning,
    /// user_distance, head_pose, platform_pose or mixed
    #[arg(long)]
    pub task: String,
    /// Use only the original series, without augmented variants
    #[arg(long)]
    pub no_augment: bool,
    /// Per-AOI entries as signed rather than absolute means
    #[arg(long)]
    pub signed: bool,
    /// Keep only the five summary statistics
    #[arg(long)]
    pub reduced: bool,
}

#[derive(Args, Debug)]
pub struct TsneArgs {
    #[command(flatten)]
    pub common: Common,
    /// Feature CSV [default: <out>/features/<task>.csv]
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long, default_value_t = 80.0)]
    pub perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 200.0)]
    pub learning_rate: f64,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// knn, svm, mlp or forest
    #[arg(long, default_value = "knn")]
    pub model: String,
    /// Neighbors for knn
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// SVM box constraint
    #[arg(long, default_value_t = 10.0)]
    pub c: f64,
    /// RBF kernel width
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// MLP hidden layer sizes
    #[arg(long, value_delimiter = ',', default_value = "50,100,50")]
    pub layers: Vec<usize>,
    /// MLP L2 penalty
    #[arg(long, default_value_t = 1e-4)]
    pub alpha: f64,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 200)]
    pub trees: usize,
    #[arg(long, default_value_t = 8)]
    pub max_depth: usize,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Feature CSV [default: <out>/features/<task>.csv]
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub task: Option<String>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Cross-validation folds
    #[arg(long, default_value_t = 10)]
    pub cv: usize,
    /// Search the default grid of the model family first and keep the best
    #[arg(long)]
    pub grid: bool,
    /// Also compute a learning curve
    #[arg(long)]
    pub learning_curve: bool,
    /// Learning-curve training sizes [default: five steps up to the smallest training fold]
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    /// Keep only the five summary statistics
    #[arg(long)]
    pub reduced: bool,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Model file written by train
    #[arg(long = "model-file", alias = "model")]
    pub model_file: PathBuf,
    /// Feature CSV to score
    #[arg(long)]
    pub features: PathBuf,
}

#[derive(Args, Debug)]
pub struct RegressArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub cleaning: Cleaning,
    /// Condition whose sessions are fit, e.g. head_roll20
    #[arg(long)]
    pub condition: String,
    /// Restrict to one platform when the inputs hold both
    #[arg(long)]
    pub platform: Option<String>,
    /// linear or mlp
    #[arg(long, default_value = "linear")]
    pub model: String,
    /// none, ridge, lasso or elasticnet
    #[arg(long, default_value = "elasticnet")]
    pub penalty: String,
    /// Penalty strength [default: 0.5 for elasticnet, 0.001 otherwise]
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub l1_ratio: f64,
    /// Polynomial degree of the inputs
    #[arg(long, default_value_t = 1)]
    pub degree: usize,
    /// MLP hidden layer sizes
    #[arg(long, value_delimiter = ',', default_value = "100")]
    pub layers: Vec<usize>,
    /// Held-out fraction
    #[arg(long, default_value_t = 0.2)]
    pub test_frac: f64,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Output directory to summarize
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Usage(_) => 1,
        Error::Data(_) | Error::Io { .. } => 2,
        Error::Numeric(_) => 3,
    }
}

fn main() -> ExitCode {
    let argv = match config::merged_args(std::env::args_os()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("gazelab: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gazelab: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_kinds_map_to_exit_codes() {
        assert_eq!(exit_code(&Error::usage("x")), 1);
        assert_eq!(exit_code(&Error::data("x")), 2);
        assert_eq!(exit_code(&Error::io("f", std::io::Error::other("x"))), 2);
        assert_eq!(exit_code(&Error::numeric("x")), 3);
    }

    #[test]
    fn clap_definitions_are_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
