use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "outer-ppo", version, about = "PPO with configurable outer updates: train, sweep, evaluate, aggregate, plot")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one agent and write events, checkpoints and a summary.
    Train(TrainArgs),
    /// Run or export a hyperparameter sweep.
    Sweep(SweepArgs),
    /// Evaluate a saved policy.
    Eval(EvalArgs),
    /// Aggregate score files into normalized metrics with bootstrap intervals.
    Metrics(MetricsArgs),
    /// Render metrics or sweep results as SVG with a CSV sidecar.
    Plot(PlotArgs),
    /// List presets or emit one as JSON.
    Presets(PresetsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OuterKind {
    Standard,
    Lr,
    Nesterov,
    Biased,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigSource {
    /// Run config JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named run preset (see `presets`).
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// Environment id; without a config or preset it picks the matching desk preset.
    #[arg(long)]
    pub env: Option<String>,
    /// Dotted-path override, e.g. `--set ppo.clip_eps=0.1`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub outer: Option<OuterKind>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Total environment transitions.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Number of parallel environments.
    #[arg(long)]
    pub envs: Option<usize>,
    /// Method name recorded in summaries.
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub source: ConfigSource,
    /// Output directory.
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
    /// Also write `trainer.ckpt` every this many iterations.
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    /// Checkpoint and stop once this iteration is reached, as if interrupted.
    #[arg(long)]
    pub stop_at: Option<u64>,
    /// Continue from the `trainer.ckpt` an interrupted run left in `--out`.
    #[arg(long)]
    pub resume: bool,
    /// Only print the final summary line.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(subcommand)]
    pub action: SweepAction,
}

#[derive(Debug, Clone, Subcommand)]
pub enum SweepAction {
    /// Run a sweep, resuming from an existing results file.
    Run {
        /// Sweep spec JSON.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Named sweep preset.
        #[arg(long, conflicts_with = "spec")]
        preset: Option<String>,
        /// Dotted-path override into the spec, e.g. `--set base.total_transitions=50000`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Append-only JSON-lines results file.
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Stop after this many new seeds.
        #[arg(long)]
        stop_after: Option<usize>,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Export trial summaries for external analysis.
    Export {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: ExportFormat,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Policy or trainer checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub source: ConfigSource,
    #[arg(long, default_value_t = 128)]
    pub episodes: u64,
    /// Evaluation seed; defaults to the run's absolute-evaluation seed.
    #[arg(long)]
    pub eval_seed: Option<u64>,
    /// Write the result JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MetricsArgs {
    /// Score files: JSON lines of run summaries (a run's `summary.json` also works).
    #[arg(required = true)]
    pub scores: Vec<PathBuf>,
    /// `reference`, `local`, or a CSV path with columns task,min,max.
    #[arg(long, default_value = "local")]
    pub normalization: String,
    /// Method the others are compared against for probability of improvement.
    #[arg(long)]
    pub baseline: Option<String>,
    #[arg(long, default_value_t = outer_ppo::metrics::DEFAULT_REPLICATES)]
    pub replicates: usize,
    #[arg(long, default_value_t = outer_ppo::metrics::DEFAULT_CONFIDENCE)]
    pub confidence: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of performance-profile thresholds between 0 and the largest score.
    #[arg(long, default_value_t = 51)]
    pub profile_points: usize,
    /// Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Aggregates,
    Poi,
    Profile,
    Efficiency,
    #[value(name = "sensitivity-1d")]
    Sensitivity1d,
    #[value(name = "sensitivity-2d")]
    Sensitivity2d,
}

impl PlotKind {
    pub fn file_stem(&self) -> &'static str {
        match self {
            PlotKind::Aggregates => "aggregates",
            PlotKind::Poi => "poi",
            PlotKind::Profile => "profile",
            PlotKind::Efficiency => "efficiency",
            PlotKind::Sensitivity1d => "sensitivity-1d",
            PlotKind::Sensitivity2d => "sensitivity-2d",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    #[arg(value_enum)]
    pub kind: PlotKind,
    /// Metrics JSON, or a sweep results file for the sensitivity plots.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for `<kind>.svg` and `<kind>.csv`.
    #[arg(long, default_value = "plots")]
    pub out: PathBuf,
    /// Sweep axis on the horizontal.
    #[arg(long, default_value = "outer.sigma")]
    pub x_axis: String,
    /// Sweep axis on the vertical (sensitivity-2d).
    #[arg(long, default_value = "outer.mu")]
    pub y_axis: String,
    /// Normalize sweep objectives with this CSV (task,min,max).
    #[arg(long)]
    pub normalization: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PresetsArgs {
    /// Preset to emit; lists every name when omitted.
    pub name: Option<String>,
    /// Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
