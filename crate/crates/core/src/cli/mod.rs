//! The `cabin-ews` command line.
//!
//! Configuration precedence, lowest to highest: built-in defaults, the JSON
//! file given by `--config`, then command-line flags. A global `--seed`
//! replaces every seed in the run (generator, undersampling, model init and
//! shuffling). Without one, the model is initialized from
//! `train.shuffle_seed`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 I/O error.

mod commands;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, EXIT_OK, EXIT_USAGE};
use crate::eval::RmseUnits;
use crate::ews::{MonitorConfig, ThresholdConfig};
use crate::preprocess::{PreprocessConfig, Split};
use crate::seq2seq::{Architecture, TrainConfig};
use crate::telemetry::SynthConfig;

/// Artifact locations that may come from the config file instead of flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub telemetry_csv: Option<PathBuf>,
    pub dataset_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub alarm_log: Option<PathBuf>,
}

/// Everything a subcommand needs, merged from defaults, the config file and
/// flags before any pipeline call.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub synth: SynthConfig,
    pub preprocess: PreprocessConfig,
    pub architecture: Architecture,
    pub train: TrainConfig,
    pub thresholds: ThresholdConfig,
    pub monitor: MonitorConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Config {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Applies `seed` to every seeded stage.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self.synth.seed = seed;
        self.preprocess.rng_seed = seed;
        self.train.shuffle_seed = seed;
        self
    }

    pub fn model_seed(&self) -> u64 {
        self.seed.unwrap_or(self.train.shuffle_seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.preprocess.validate()?;
        self.train.validate()?;
        self.thresholds.validate()?;
        if self.monitor.prediction_cadence_s < 1 {
            return Err(Error::Invalid("monitor.prediction_cadence_s must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "cabin-ews",
    version,
    about = "Cabin particulate forecasting and early-warning pipeline",
    after_help = "Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 I/O error."
)]
pub struct Cli {
    /// JSON run configuration; flags override its values
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for every random stage [default: from config]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppress progress and summary output
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write seeded synthetic 1 Hz telemetry as CSV
    Gen(GenArgs),
    /// Clean, prune, normalize, window and undersample a telemetry CSV
    Prep(PrepArgs),
    /// Train a forecaster on a prepared dataset and save a checkpoint
    Train(TrainArgs),
    /// Score one or two checkpoints on a prepared dataset
    Eval(EvalArgs),
    /// Forecast the horizon after one lookback window of a CSV
    Predict(PredictArgs),
    /// Stream telemetry through the forecaster and raise threshold alarms
    Monitor(MonitorArgs),
    /// Re-run prep and training on new data and write the next model generation
    Retrain(RetrainArgs),
}

fn positive_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be a positive number, got {s}"))
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Duration in hours [default: 24, or synth.duration_s from config]
    #[arg(long, value_parser = positive_f64)]
    pub hours: Option<f64>,
    /// Output CSV; `-` for stdout [default: paths.telemetry_csv, else stdout]
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// First timestamp in Unix seconds [default: 1640995200]
    #[arg(long)]
    pub start: Option<i64>,
}

#[derive(Debug, Args)]
pub struct PrepArgs {
    /// Input telemetry CSV [default: paths.telemetry_csv]
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Output dataset directory [default: paths.dataset_dir]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Lookback window in seconds [default: 5400]
    #[arg(long)]
    pub lookback_s: Option<usize>,
    /// Forecast horizon in seconds [default: 60]
    #[arg(long)]
    pub horizon_s: Option<usize>,
    /// Seconds between window origins [default: 60]
    #[arg(long)]
    pub stride_s: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Prepared dataset directory [default: paths.dataset_dir]
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
    /// Checkpoint to write [default: paths.checkpoint]
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Bidirectional encoder; `false` trains the ordinary GRU baseline [default: true]
    #[arg(long, action = clap::ArgAction::Set, value_name = "BOOL")]
    pub bidirectional: Option<bool>,
    /// Maximum epochs [default: 60]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Loss-curve CSV [default: next to the checkpoint, extension .loss.csv]
    #[arg(long, value_name = "PATH")]
    pub loss_curve: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UnitsArg {
    Normalized,
    Raw,
}

impl From<UnitsArg> for RmseUnits {
    fn from(u: UnitsArg) -> Self {
        match u {
            UnitsArg::Normalized => RmseUnits::Normalized,
            UnitsArg::Raw => RmseUnits::Raw,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint to score; give twice for a GRU vs Bi-GRU comparison [default: paths.checkpoint]
    #[arg(long, value_name = "PATH", num_args = 1, action = clap::ArgAction::Append)]
    pub checkpoint: Vec<PathBuf>,
    /// Prepared dataset directory [default: paths.dataset_dir]
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
    /// Directory for rmse.json, predictions and comparison CSVs [default: paths.output_dir]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Split whose predictions are exported and compared
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    /// RMSE units of the comparison CSV
    #[arg(long, value_enum, default_value_t = UnitsArg::Normalized)]
    pub units: UnitsArg,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Checkpoint to load [default: paths.checkpoint]
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// Telemetry CSV holding at least one lookback window [default: paths.telemetry_csv]
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Timestamp of the last input frame [default: the last frame in the file]
    #[arg(long)]
    pub at: Option<i64>,
    /// Forecast CSV; `-` for stdout
    #[arg(long, value_name = "PATH", default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MonitorArgs {
    /// Checkpoint to load [default: paths.checkpoint]
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// Telemetry CSV stream; `-` for stdin
    #[arg(long, value_name = "PATH", default_value = "-")]
    pub input: PathBuf,
    /// Append alarm records to this file [default: paths.alarm_log, else off]
    #[arg(long, value_name = "PATH")]
    pub alarm_log: Option<PathBuf>,
    /// Do not print alarm records on stdout
    #[arg(long)]
    pub no_console: bool,
    /// Replay recorded data at this multiple of real time [default: as fast as possible]
    #[arg(long, value_parser = positive_f64)]
    pub replay_speed: Option<f64>,
    /// Stream seconds between forecasts [default: 60]
    #[arg(long)]
    pub cadence_s: Option<i64>,
}

#[derive(Debug, Args)]
pub struct RetrainArgs {
    /// Current checkpoint [default: paths.checkpoint]
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// New telemetry CSV
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Checkpoint to write for the next generation
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Also save the prepared dataset here
    #[arg(long, value_name = "DIR")]
    pub dataset_out: Option<PathBuf>,
    /// Proceed when pruning keeps a different feature set than the current model
    #[arg(long)]
    pub allow_feature_change: bool,
}

pub(crate) fn require(flag: Option<&PathBuf>, fallback: Option<&PathBuf>, name: &str, key: &str) -> Result<PathBuf> {
    flag.or(fallback)
        .cloned()
        .ok_or_else(|| Error::Usage(format!("missing --{name} (or paths.{key} in the config file)")))
}

/// Builds the effective configuration: defaults, then the config file, then
/// the global seed flag. Subcommand flags are applied by each command.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed.or(cfg.seed) {
        cfg = cfg.with_seed(seed);
    }
    Ok(cfg)
}

/// Runs an already-parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let quiet = cli.quiet;
    match &cli.command {
        Command::Gen(a) => commands::gen(cfg, a, quiet),
        Command::Prep(a) => commands::prep(cfg, a, quiet),
        Command::Train(a) => commands::train(cfg, a, quiet),
        Command::Eval(a) => commands::eval(cfg, a, quiet),
        Command::Predict(a) => commands::predict(cfg, a),
        Command::Monitor(a) => commands::monitor(cfg, a, quiet),
        Command::Retrain(a) => commands::retrain(cfg, a, quiet, cli.seed),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn seed_reaches_every_stage() {
        let cfg = RunConfig::default().with_seed(42);
        assert_eq!(cfg.synth.seed, 42);
        assert_eq!(cfg.preprocess.rng_seed, 42);
        assert_eq!(cfg.train.shuffle_seed, 42);
        assert_eq!(cfg.model_seed(), 42);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"trian": {}}"#).unwrap_err();
        assert!(err.to_string().contains("trian"));
        let cfg: RunConfig = serde_json::from_str(r#"{"train": {"epochs": 3}}"#).unwrap();
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.batch_size, TrainConfig::default().batch_size);
    }

    #[test]
    fn zero_hours_is_a_usage_error() {
        assert_eq!(run(["cabin-ews", "gen", "--hours", "0"]), EXIT_USAGE);
        assert_eq!(run(["cabin-ews", "gen", "--hours", "-1"]), EXIT_USAGE);
    }

    #[test]
    fn missing_path_is_a_usage_error() {
        assert_eq!(run(["cabin-ews", "--quiet", "train"]), EXIT_USAGE);
    }
}
