//! Command-line surface. Lists (layer sizes, norms, grids, file sets) are
//! single comma-separated values so every option echoes as one `key=value`.

use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "smoothcert", version, about = "Distill query-only classifiers and certify them with randomized smoothing")]
pub struct Cli {
    /// Flat key=value file; top-level keys are global options, `[command]`
    /// sections hold that command's options. Flags on the command line win.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Master seed for every random stream of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Deterministic substream count (and thread count) for parallel stages.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic Gaussian-blob dataset.
    GenData(GenDataArgs),
    /// Train the target (teacher) classifier.
    TrainTarget(TrainTargetArgs),
    /// Distill a surrogate from a teacher reachable only through queries.
    Distill(DistillArgs),
    /// Smoothed prediction with certified radii for every input.
    Certify(CertifyArgs),
    /// Certified radius for given probability bounds, or a p_A sweep.
    Radius(RadiusArgs),
    /// Score exponential-power shapes by robust accuracy and pick the best per norm.
    NoiseSearch(NoiseSearchArgs),
    /// Keep only inputs the smoothed classifier does not abstain on.
    Purify(PurifyArgs),
    /// Certified accuracy curves and robust scores from certify outputs.
    Score(ScoreArgs),
    /// Confidence-threshold membership inference against target and surrogates.
    Mia(MiaArgs),
    /// Projected gradient attack on a checkpoint.
    Attack(AttackArgs),
    /// Re-run the command recorded in an artifact header.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Dataset file.
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// `csv` (header `label,f0,...`) or `idx` (big-endian image file).
    #[arg(long, default_value = "csv")]
    pub format: String,
    /// Label file paired with an idx image file.
    #[arg(long, value_name = "PATH")]
    pub idx_labels: Option<PathBuf>,
    /// Number of classes; inferred from the labels when absent.
    #[arg(long)]
    pub classes: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct NoiseArgs {
    /// gaussian, laplace, exp-power, cauchy or pareto.
    #[arg(long, default_value = "gaussian")]
    pub family: String,
    /// Shape: exponent for exp-power, tail index for pareto.
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    /// Standard deviation (scale for cauchy and pareto).
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
}

#[derive(Args, Debug, Clone)]
pub struct SmoothArgs {
    #[arg(long, default_value_t = 100)]
    pub n0: usize,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.001)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub zeta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub iota: f64,
    /// Norms to certify, e.g. `l1,l2,linf`.
    #[arg(long, default_value = "l2")]
    pub norms: String,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub two_round: bool,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// Noise draws per boundary evaluation.
    #[arg(long, default_value_t = 4000)]
    pub mc_n: usize,
    #[arg(long, default_value_t = 0.01)]
    pub k_threshold: f64,
    #[arg(long, default_value_t = 25)]
    pub bisect_iters: usize,
    #[arg(long, default_value_t = 16)]
    pub particles: usize,
    #[arg(long, default_value_t = 30)]
    pub pso_iters: usize,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    /// Hidden layer widths, e.g. `32,16`; `none` for a linear model.
    #[arg(long, default_value = "32")]
    pub hidden: String,
    #[arg(long, default_value = "relu")]
    pub activation: String,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// sgd or adam.
    #[arg(long, default_value = "adam")]
    pub optimizer: String,
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 500)]
    pub per_class: usize,
    /// Distance between the two centres (from the origin times two for more classes).
    #[arg(long, default_value_t = 8.0)]
    pub separation: f64,
    /// Per-coordinate standard deviation around each centre.
    #[arg(long, default_value_t = 1.0)]
    pub spread: f64,
    /// Offset added to every coordinate, to emulate distribution shift.
    #[arg(long, default_value_t = 0.0)]
    pub shift: f64,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainTargetArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// cross-entropy, mse or l1-logit.
    #[arg(long, default_value = "cross-entropy")]
    pub loss: String,
    /// Train on noisy copies of the inputs drawn from this family; `none` for plain training.
    #[arg(long, default_value = "none")]
    pub noise: String,
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Output checkpoint.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DistillArgs {
    /// Teacher checkpoint; only reached through a metered query handle.
    #[arg(long, value_name = "PATH")]
    pub teacher: PathBuf,
    /// Transfer set (labels, if any, are ignored).
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Maximum number of teacher queries.
    #[arg(long, default_value_t = 10_000)]
    pub budget: usize,
    /// logits or label-only.
    #[arg(long, default_value = "logits")]
    pub mode: String,
    /// Labelled set for the accuracy ratio.
    #[arg(long, value_name = "PATH")]
    pub eval: Option<PathBuf>,
    /// Surrogate checkpoint.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Key-value report.
    #[arg(long, value_name = "PATH")]
    pub report: PathBuf,
    /// Per-epoch loss CSV.
    #[arg(long, value_name = "PATH")]
    pub loss_history: PathBuf,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    /// Base classifier checkpoint.
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub smooth: SmoothArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RadiusArgs {
    /// Lower bound on the top-class probability (first value of a sweep).
    #[arg(long)]
    pub pa: f64,
    /// Upper bound on the runner-up probability; `1 - pA` when absent.
    #[arg(long)]
    pub pb: Option<f64>,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Norms, one row each, e.g. `l1,l2,linf`.
    #[arg(long, default_value = "l2")]
    pub norm: String,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Sweep pA from `--pa` up to this value (curve mode).
    #[arg(long)]
    pub curve_stop: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub curve_step: f64,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct NoiseSearchArgs {
    /// Labelled training CSV.
    #[arg(long, value_name = "PATH")]
    pub train_data: PathBuf,
    /// Labelled evaluation CSV.
    #[arg(long, value_name = "PATH")]
    pub eval_data: PathBuf,
    /// Exponential-power shapes to compare.
    #[arg(long, default_value = "0.5,1,2,3")]
    pub betas: String,
    /// Noise levels averaged into each shape's score.
    #[arg(long, default_value = "0.5,1")]
    pub sigmas: String,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub smooth: SmoothArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Radius grid spacing for the accuracy curves.
    #[arg(long, default_value_t = 0.1)]
    pub grid_step: f64,
    /// Scores CSV (`norm,beta,score`).
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PurifyArgs {
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub smooth: SmoothArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Certify outputs, comma-separated. Shape, level and dataset are read from their headers.
    #[arg(long)]
    pub inputs: String,
    /// Norm of the emitted curves.
    #[arg(long, default_value = "l2")]
    pub norm: String,
    #[arg(long, default_value_t = 0.1)]
    pub grid_step: f64,
    /// Upper integration limit; largest radius plus one step when absent.
    #[arg(long)]
    pub r_max: Option<f64>,
    /// Curves CSV (`sigma,R,acc`).
    #[arg(long, value_name = "PATH")]
    pub curves_out: PathBuf,
    /// Scores CSV (`norm,beta,score`).
    #[arg(long, value_name = "PATH")]
    pub scores_out: PathBuf,
}

#[derive(Args, Debug)]
pub struct MiaArgs {
    #[arg(long, value_name = "PATH")]
    pub target: PathBuf,
    /// Distilled surrogate; also attacked in smoothed form.
    #[arg(long, value_name = "PATH")]
    pub surrogate: Option<PathBuf>,
    /// Training set of the target.
    #[arg(long, value_name = "PATH")]
    pub members: PathBuf,
    /// Data the target never saw.
    #[arg(long, value_name = "PATH")]
    pub nonmembers: PathBuf,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub smooth: SmoothArgs,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AttackArgs {
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// l2 or linf.
    #[arg(long, default_value = "linf")]
    pub norm: String,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.01)]
    pub step_size: f64,
    #[arg(long, default_value_t = false, action = ArgAction::Set)]
    pub random_start: bool,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    /// Any file written by this tool.
    pub artifact: PathBuf,
    /// Print the reconstructed command line instead of running it.
    #[arg(long)]
    pub print: bool,
}
