//! Command-line surface.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "labelset",
    version,
    about = "Set-valued classifiers with coverage guarantees",
    long_about = "Fit posterior estimators, calibrate per-class or total thresholds (plug-in or \
                  split-conformal), complete away empty predictions, predict label sets, and \
                  evaluate coverage/ambiguity. Gaussian-mixture oracle commands reproduce the \
                  ideal classifiers by seeded Monte-Carlo. Set LABELSET_THREADS to cap worker \
                  threads; every command is deterministic given --seed."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a posterior estimator and write a model artifact.
    Fit(FitArgs),
    /// Calibrate thresholds for a fitted model and write a thresholds artifact.
    Calibrate(CalibrateArgs),
    /// Predict label sets for feature rows.
    Predict(PredictArgs),
    /// Predict and score against true labels.
    Evaluate(EvaluateArgs),
    /// Ideal-classifier computations on a built-in Gaussian mixture.
    Oracle(OracleArgs),
    /// Re-run a command from a recorded run_config.txt.
    Rerun(RerunArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorKind {
    Knn,
    Kernel,
    Logistic,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelModeArg {
    Regression,
    ClassConditional,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoverageModeArg {
    Total,
    Class,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodArg {
    Plugin,
    Conformal,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompleteArg {
    None,
    Fill,
    Accretive,
    Total,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Training CSV (header row, numeric features).
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the label column.
    #[arg(long)]
    pub label_col: String,
    #[arg(long, value_enum)]
    pub estimator: EstimatorKind,
    /// Neighbor count (knn).
    #[arg(long)]
    pub k: Option<usize>,
    /// Kernel bandwidth: "auto", "auto-pooled", or comma-separated values.
    #[arg(long, default_value = "auto")]
    pub bandwidth: String,
    /// Kernel posterior form.
    #[arg(long, value_enum, default_value = "class-conditional")]
    pub kernel_mode: KernelModeArg,
    /// Ridge penalty (logistic).
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Gradient-descent iteration cap (logistic).
    #[arg(long, default_value_t = 5000)]
    pub max_iter: usize,
    /// Gradient sup-norm stopping tolerance (logistic).
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    /// Fit on the fit half of a seeded split instead of all rows.
    #[arg(long)]
    pub split_frac: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub label_col: String,
    /// Model artifact from `fit`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum)]
    pub coverage_mode: CoverageModeArg,
    /// Error level alpha: a scalar, or a comma list with one value per class.
    #[arg(long)]
    pub alpha: String,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Split fraction; required for conformal calibration, optional for plug-in.
    #[arg(long)]
    pub split_frac: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Threshold completion: none, accretive (class mode), or total (total mode).
    #[arg(long, value_enum, default_value = "none")]
    pub complete: CompleteArg,
    /// Accretive step size.
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Label column to drop, when the file carries one.
    #[arg(long)]
    pub label_col: Option<String>,
    #[arg(long)]
    pub model: PathBuf,
    /// Thresholds artifact from `calibrate` or `oracle`.
    #[arg(long)]
    pub thresholds: PathBuf,
    /// Empty-set handling: none, or fill (argmax baseline).
    #[arg(long, value_enum, default_value = "none")]
    pub complete: CompleteArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub label_col: String,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub thresholds: PathBuf,
    #[arg(long, value_enum, default_value = "none")]
    pub complete: CompleteArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    /// Built-in distribution: example1 or example3.
    pub preset: String,
    /// Target coverage 1 - alpha.
    #[arg(long)]
    pub coverage: f64,
    #[arg(long, value_enum, default_value = "class")]
    pub coverage_mode: CoverageModeArg,
    #[arg(long, value_enum, default_value = "none")]
    pub complete: CompleteArg,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    /// Monte-Carlo sample size per estimate.
    #[arg(long, default_value_t = 200_000)]
    pub mc: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Raster bounding box as x0,x1,y0,y1 (2-D presets).
    #[arg(long, default_value = "-8,8,-7,8", allow_hyphen_values = true)]
    pub raster_box: String,
    /// Raster grid points per axis; 0 disables the raster.
    #[arg(long, default_value_t = 200)]
    pub raster_res: usize,
    /// Emit a coverage curve over these comma-separated total coverages.
    #[arg(long)]
    pub curve: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RerunArgs {
    /// A run_config.txt written by a previous run.
    #[arg(long)]
    pub config: PathBuf,
}
