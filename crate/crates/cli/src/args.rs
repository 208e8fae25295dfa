use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug, Serialize)]
#[command(name = "vigilkit", version, about = "Vigilance scoring, EEG band-power features and relevance analysis")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GlobalArgs {
    /// Master seed for every stochastic stage.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; nothing is written outside it.
    #[arg(long, global = true, default_value = "vigilkit-out")]
    pub out: PathBuf,
    /// TOML file of `flag = value` pairs; explicit flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Standardise over all participants before cross-validation.
    #[arg(long, global = true)]
    pub paper_compat: bool,
    /// Worker threads; results do not depend on it
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug, Serialize)]
pub enum Command {
    /// Score SART event logs.
    Score(ScoreArgs),
    /// Extract band-power ratio features from resting recordings.
    Extract(ExtractArgs),
    /// Univariate cross-validated screening of features.
    Screen(ScreenArgs),
    /// Screening followed by exhaustive subset regression.
    Mvpa(MvpaArgs),
    /// Neural-network grid search and averaged weight maps.
    NnTrain(NnArgs),
    /// Generate synthetic logs, cohorts and recordings.
    Synth(SynthArgs),
    /// Render figures from earlier outputs.
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Score(_) => "score",
            Command::Extract(_) => "extract",
            Command::Screen(_) => "screen",
            Command::Mvpa(_) => "mvpa",
            Command::NnTrain(_) => "nn-train",
            Command::Synth(_) => "synth",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct ScoreArgs {
    #[arg(required = true)]
    pub logs: Vec<PathBuf>,
    #[arg(long, default_value_t = 36)]
    pub window: usize,
    #[arg(long, default_value_t = 27)]
    pub calib_trials: usize,
    #[arg(long, default_value_t = 250.0)]
    pub rt_lower_ms: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
pub enum StateArg {
    Eo,
    Ec,
}

#[derive(Args, Debug, Serialize)]
pub struct ExtractArgs {
    /// Recording headers (`.json`) or small CSV recordings (`.csv`).
    #[arg(required = true)]
    pub recordings: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub state: StateArg,
    #[arg(long)]
    pub bands: Option<PathBuf>,
    #[arg(long)]
    pub roi_map: Option<PathBuf>,
    /// Sampling rate of CSV recordings.
    #[arg(long)]
    pub fs_hz: Option<f64>,
    /// Ocular channel names of CSV recordings.
    #[arg(long, value_delimiter = ',')]
    pub eog: Vec<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct TableArgs {
    /// CSV with a participant id column first, one row per participant.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub target: String,
    /// Separate CSV holding the target column, joined on participant id.
    #[arg(long)]
    pub targets: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ScreenArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct MvpaArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 500)]
    pub perms: usize,
    #[arg(long, default_value_t = vigilkit_core::relevance::search::DEFAULT_SUBSET_CAP)]
    pub subset_cap: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct NnArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[arg(long, value_delimiter = ',', default_value = "40,90,110,130")]
    pub units: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long, default_value_t = 1000)]
    pub max_epochs: usize,
    /// Drop participants whose target exceeds mean + 2 SD.
    #[arg(long)]
    pub exclude_outliers: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    /// Responder archetype, or `all` to cycle through every archetype.
    #[arg(long, default_value = "all")]
    pub profile: String,
    #[arg(long, default_value_t = 10)]
    pub participants: usize,
    /// Cohort plant (JSON) for a feature table with a planted target.
    #[arg(long)]
    pub plant: Option<PathBuf>,
    /// Also write one resting recording per participant.
    #[arg(long)]
    pub recordings: bool,
    #[arg(long, default_value_t = 20.0)]
    pub duration_s: f64,
}

#[derive(Args, Debug, Serialize)]
#[command(group(ArgGroup::new("figure").required(true).multiple(true).args(["weights", "features"])))]
pub struct ReportArgs {
    /// Weight CSV from `nn-train`; rendered as a region-by-band heat map.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Plot the normalised weights instead of the raw ones.
    #[arg(long, requires = "weights")]
    pub normalized: bool,
    /// Feature CSV for a predicted-versus-true scatter plot.
    #[arg(long, requires_all = ["target", "subset"])]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub targets: Option<PathBuf>,
    /// Feature names of the regression model.
    #[arg(long, value_delimiter = ',')]
    pub subset: Vec<String>,
    #[arg(long, default_value = "")]
    pub title: String,
}

/// Value of `--config` in `argv`, if any.
fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

fn has_flag(argv: &[OsString], flag: &str) -> bool {
    argv.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.starts_with(&format!("{flag}="))
    })
}

/// Appends `--key=value` for each config entry whose flag is absent from
/// `argv`; unknown keys surface later as usage errors.
pub fn merge_config(mut argv: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" || has_flag(&argv, &flag) {
            continue;
        }
        let text = match value {
            toml::Value::Boolean(true) => {
                argv.push(flag.into());
                continue;
            }
            toml::Value::Boolean(false) => continue,
            toml::Value::String(s) => s,
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            toml::Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    toml::Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
            other => bail!("config key {key} has unsupported value {other}"),
        };
        argv.push(format!("{flag}={text}").into());
    }
    Ok(argv)
}
