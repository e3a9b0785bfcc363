mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use eventcast_core::decomposition::Method;
use eventcast_core::evaluation::MmaneScope;
use eventcast_core::features::{LaggedCode, Variant};
use eventcast_core::grouping::GroupLabel;
use eventcast_core::models::{MaxFeatures, ModelKind};
use eventcast_core::panel::YearMonth;

/// Forecast monthly negative-event counts per district from a panel of
/// past events and investments.
#[derive(Debug, Parser)]
#[command(name = "eventcast", version)]
pub struct Cli {
    /// Flat `key = value` file of default flag values; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Generate a synthetic panel CSV.
    Synth(SynthArgs),
    /// Assign districts to ANE groups and summarise them.
    Group(GroupArgs),
    /// Decompose each group's MMANE series and compare methods.
    Decompose(DecomposeArgs),
    /// Rank single lagged investment variables against the decomposition residual.
    Screen(ScreenArgs),
    /// Write the feature matrix of one group and variant.
    Features(FeaturesArgs),
    /// Fit and score the full task × variant × model grid.
    Run(RunArgs),
    /// Write plot-data CSVs from a panel and a finished run.
    Plotdata(PlotdataArgs),
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct GroupingArgs {
    /// Groups are A: ANE <= LOW (exact zero by default), B: LOW < ANE <= HIGH, C: ANE > HIGH.
    #[arg(long, default_value_t = 0.0)]
    pub ane_low: f64,
    #[arg(long, default_value_t = 2.0)]
    pub ane_high: f64,
}

#[derive(Debug, Args)]
#[command(args_override_self = true, allow_negative_numbers = true)]
pub struct SynthArgs {
    /// Base seed; required, all randomness derives from it.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 400)]
    pub districts: usize,
    #[arg(long, default_value_t = 84)]
    pub months: usize,
    /// First month, YYYY-MM.
    #[arg(long, default_value = "2004-01")]
    pub start: YearMonth,
    /// Share of districts that never record an event.
    #[arg(long)]
    pub silent_fraction: Option<f64>,
    /// Log event rate of a typical district at the start of the panel.
    #[arg(long)]
    pub base_log_rate: Option<f64>,
    /// Standard deviation of per-district log-rate offsets.
    #[arg(long)]
    pub district_spread: Option<f64>,
    /// Log-rate increase per month.
    #[arg(long)]
    pub trend_slope: Option<f64>,
    /// Amplitude of the yearly log-rate cycle.
    #[arg(long)]
    pub seasonal_amplitude: Option<f64>,
    /// Investment codes to generate, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub codes: Option<Vec<String>>,
    /// Planted investment effects CODE-LAG=COEFFICIENT, comma separated (e.g. A6-6=0.5).
    #[arg(long, value_delimiter = ',')]
    pub plant: Option<Vec<String>>,
    /// Mean projects per district-month.
    #[arg(long)]
    pub investment_rate: Option<f64>,
    /// Log-scale spread of the shared monthly investment shock.
    #[arg(long)]
    pub investment_shock: Option<f64>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct GroupArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub grouping: GroupingArgs,
    /// Width of the ANE histogram bins.
    #[arg(long, default_value_t = 0.5)]
    pub bin_width: f64,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct StlArgs {
    #[arg(long, default_value_t = 7)]
    pub stl_seasonal: usize,
    #[arg(long, default_value_t = 23)]
    pub stl_trend: usize,
    #[arg(long, default_value_t = 13)]
    pub stl_low_pass: usize,
    #[arg(long, default_value_t = 2)]
    pub stl_inner: usize,
    #[arg(long, default_value_t = 1)]
    pub stl_outer: usize,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct DecomposeArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "B,C")]
    pub groups: Vec<GroupLabel>,
    #[arg(long, value_delimiter = ',', default_value = "additive,multiplicative,stl")]
    pub methods: Vec<Method>,
    #[command(flatten)]
    pub grouping: GroupingArgs,
    #[command(flatten)]
    pub stl: StlArgs,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ScreenArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "B,C")]
    pub groups: Vec<GroupLabel>,
    /// Investment codes to screen (default: every code in the panel).
    #[arg(long, value_delimiter = ',')]
    pub codes: Option<Vec<String>>,
    #[arg(long, default_value_t = 12)]
    pub max_lag: usize,
    /// Keep only the best K pairs per group.
    #[arg(long)]
    pub top: Option<usize>,
    #[command(flatten)]
    pub grouping: GroupingArgs,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct FeatureSetArgs {
    /// Selected lagged investment features CODE-LAG, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "A6-6,B9-4")]
    pub sid: Vec<LaggedCode>,
    /// Average MMANE features over the district's group or over all districts.
    #[arg(long, default_value = "group")]
    pub mmane_scope: MmaneScope,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct FeaturesArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long)]
    pub group: GroupLabel,
    #[arg(long, default_value = "V1")]
    pub variant: Variant,
    #[command(flatten)]
    pub features: FeatureSetArgs,
    #[command(flatten)]
    pub grouping: GroupingArgs,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 100)]
    pub rf_trees: usize,
    /// Maximum tree depth; 0 means unlimited.
    #[arg(long, default_value_t = 0)]
    pub rf_max_depth: usize,
    #[arg(long, default_value_t = 1)]
    pub rf_min_leaf: usize,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub rf_bootstrap: bool,
    /// Features per split: all, sqrt, third or a fraction in (0, 1].
    #[arg(long, default_value = "all")]
    pub rf_max_features: MaxFeatures,
    #[arg(long, default_value_t = 100)]
    pub gb_stages: usize,
    #[arg(long, default_value_t = 0.1)]
    pub gb_learning_rate: f64,
    /// Maximum tree depth; 0 means unlimited.
    #[arg(long, default_value_t = 3)]
    pub gb_max_depth: usize,
    #[arg(long, default_value_t = 1)]
    pub gb_min_leaf: usize,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct RunArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Base seed; required, every model seed derives from it.
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "B,C")]
    pub groups: Vec<GroupLabel>,
    /// Tasks to run, e.g. T1,T6 (default: all).
    #[arg(long, value_delimiter = ',')]
    pub tasks: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',', default_value = "V1,V2,V3,V4,V5")]
    pub variants: Vec<Variant>,
    #[arg(long, value_delimiter = ',', default_value = "LR,GB,RF,0")]
    pub models: Vec<ModelKind>,
    /// Worker threads: 1 runs sequentially, 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[command(flatten)]
    pub features: FeatureSetArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grouping: GroupingArgs,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct PlotdataArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Output directory of a finished `run`; without it only the histogram
    /// and decomposition curves are written.
    #[arg(long)]
    pub results_dir: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "B,C")]
    pub groups: Vec<GroupLabel>,
    /// Task and variant of the prediction traces.
    #[arg(long, default_value = "T6")]
    pub trace_task: String,
    #[arg(long, default_value = "V5")]
    pub trace_variant: Variant,
    /// Variant and count of the importance bars.
    #[arg(long, default_value = "V5")]
    pub importance_variant: Variant,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[arg(long, default_value_t = 0.5)]
    pub bin_width: f64,
    #[command(flatten)]
    pub grouping: GroupingArgs,
}

fn parse_args(raw: Vec<OsString>) -> Result<Cli, ExitCode> {
    let usage_error = |msg: String| {
        let mut cmd = Cli::command();
        cmd.error(clap::error::ErrorKind::InvalidValue, msg).print().ok();
        ExitCode::from(2)
    };
    let args = match config::find_config_arg(&raw) {
        None => raw,
        Some(path) => {
            let entries = config::load(path.as_ref()).map_err(|e| usage_error(format!("{e:#}")))?;
            config::merge(&Cli::command(), raw, &entries).map_err(|e| usage_error(format!("{e:#}")))?
        }
    };
    Cli::try_parse_from(args).map_err(|e| {
        let _ = e.print();
        ExitCode::from(if e.use_stderr() { 2 } else { 0 })
    })
}

fn main() -> ExitCode {
    let cli = match parse_args(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    match commands::dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
