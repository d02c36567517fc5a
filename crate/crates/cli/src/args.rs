use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use kreg_core::{KernelForm, Method, Truncation};

#[derive(Debug, Parser)]
#[command(
    name = "kreg",
    version,
    about = "Coresets for Nadaraya-Watson kernel regression",
    long_about = "Builds small weighted proxies of scalar-valued point sets and measures how \
                  closely their kernel regression tracks the full data."
)]
pub struct Cli {
    /// Seed for every random choice (sampling, first centers, evaluation points).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for batch evaluation.
    #[arg(long, global = true, env = "KREG_THREADS")]
    pub threads: Option<usize>,

    /// Print a JSON summary on standard output.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an AR(1) series as x1,y,w CSV.
    Synth(SynthArgs),
    /// Read delimited input and rewrite it as x1..xd,y,w CSV.
    Ingest(IngestArgs),
    /// Build a coreset file.
    Build(BuildArgs),
    /// Evaluate kernel regression at query points, optionally against a coreset.
    Eval(EvalArgs),
    /// Time construction and truncated querying per method and size.
    Bench(BenchArgs),
    /// Error over the cross product of methods, sizes and bandwidths.
    Sweep(SweepArgs),
    /// Progressive grid aggregation of a time series ending at the newest point.
    Progressive(ProgressiveArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of points.
    #[arg(long)]
    pub n: usize,
    /// Drift constant.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub c: f64,
    /// Autoregressive coefficient.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub phi: f64,
    /// First value.
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    pub y0: f64,
    /// Standard deviation of the Gaussian innovations.
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Input file.
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    /// Explanatory columns, by header name or 0-based position [default: x1,
    /// or none with --date-time-cols].
    #[arg(long, value_delimiter = ',')]
    pub x_cols: Option<Vec<String>>,
    /// Value column.
    #[arg(long, default_value = "y")]
    pub y_col: String,
    /// Weight column; by default a column named `w` is used when present.
    #[arg(long, conflicts_with = "unit_weights")]
    pub weight_col: Option<String>,
    /// Ignore any weight column.
    #[arg(long)]
    pub unit_weights: bool,
    /// Field delimiter (a single byte; `tab` for a tab).
    #[arg(long, default_value = ",")]
    pub delim: String,
    /// Field value treated as missing.
    #[arg(long, default_value = "?")]
    pub missing_token: String,
    /// Date and time columns (`d/m/yyyy`, `hh:mm:ss`) combined into minutes
    /// since the first record; replaces the default x column.
    #[arg(long, value_delimiter = ',', num_args = 2, value_names = ["DATE", "TIME"])]
    pub date_time_cols: Option<Vec<String>>,
    /// The input has no header row; address columns by position.
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    /// Kernel bandwidth.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// `half`: exp(-d^2 / (2 sigma^2)); `plain`: exp(-d^2 / sigma^2).
    #[arg(long, default_value_t = KernelForm::Half)]
    pub kernel_form: KernelForm,
    /// Radius cut-off, `<k>sigma` or `off`.
    #[arg(long, default_value_t = Truncation::Off)]
    pub truncate: Truncation,
}

#[derive(Debug, Args)]
pub struct CloudArgs {
    /// Skip evaluation points where the full-data density is below this.
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    /// Grow the evaluation box by this much on every side.
    #[arg(long, default_value_t = 0.0)]
    pub margin: f64,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Construction: rs, kcen, z, za, g, ga, an or prog-ga.
    #[arg(long)]
    pub method: Method,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Output coreset file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    /// Target size (rs, z, za; also kcen and the grid methods, sized by search).
    #[arg(long)]
    pub size: Option<usize>,
    /// Number of centers (kcen).
    #[arg(long)]
    pub k: Option<usize>,
    /// Grid cell side (g, ga, an).
    #[arg(long, conflicts_with_all = ["size", "eps"])]
    pub gamma: Option<f64>,
    /// Target error; with --rho and --sigma sets the cell side for g, ga, an.
    #[arg(long, requires = "rho")]
    pub eps: Option<f64>,
    /// Density threshold paired with --eps.
    #[arg(long, requires = "eps")]
    pub rho: Option<f64>,
    /// Z-order: a random offset in every block instead of one shared offset.
    #[arg(long)]
    pub per_block: bool,
    #[command(flatten)]
    pub progressive: ProgressiveParams,
}

#[derive(Debug, Args)]
pub struct ProgressiveParams {
    /// Finest cell side, used in the newest region.
    #[arg(long)]
    pub gamma1: Option<f64>,
    /// Width of the newest region; a whole multiple of --gamma1.
    #[arg(long)]
    pub width1: Option<f64>,
    /// Growth factor between consecutive regions.
    #[arg(long, default_value_t = kreg_core::coreset::DEFAULT_GROWTH)]
    pub a: f64,
    /// Number of regions; by default enough to cover the data.
    #[arg(long)]
    pub regions: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Coreset file to compare against the input.
    #[arg(long)]
    pub coreset: Option<PathBuf>,
    /// `random:N` uniform points in the evaluation box, or a CSV of query
    /// coordinates (header row, first d columns) [default: random:128000 in
    /// 1-d, random:512000 otherwise].
    #[arg(long)]
    pub queries: Option<String>,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub cloud: CloudArgs,
    /// Output file for the per-query rows; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Constructions to time.
    #[arg(long, value_delimiter = ',', required = true)]
    pub methods: Vec<Method>,
    /// Target coreset sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    /// Kernel bandwidth.
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = KernelForm::Half)]
    pub kernel_form: KernelForm,
    /// Number of uniform evaluation points [default: 128000 in 1-d, 512000
    /// otherwise].
    #[arg(long)]
    pub n_points: Option<usize>,
    #[command(flatten)]
    pub cloud: CloudArgs,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    pub methods: Vec<Method>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    /// Bandwidths.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sigmas: Vec<f64>,
    #[arg(long, default_value_t = KernelForm::Half)]
    pub kernel_form: KernelForm,
    /// Radius cut-off, `<k>sigma` or `off`.
    #[arg(long, default_value_t = Truncation::Off)]
    pub truncate: Truncation,
    /// Seeded repetitions per cell.
    #[arg(long, default_value_t = 10)]
    pub repetitions: usize,
    /// Number of uniform evaluation points [default: 128000 in 1-d, 512000
    /// otherwise].
    #[arg(long)]
    pub n_points: Option<usize>,
    #[command(flatten)]
    pub cloud: CloudArgs,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProgressiveArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub params: ProgressiveParams,
    /// Time treated as now; defaults to the newest point. Later points are
    /// dropped.
    #[arg(long, allow_negative_numbers = true)]
    pub now: Option<f64>,
    /// Output coreset file, in shifted time; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
