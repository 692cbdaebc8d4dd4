//! `vqevent`: the event pipeline as composable subcommands sharing one
//! work directory.

mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::PipelineConfig;

pub const EXIT_MISSING: u8 = 2;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_INTERNAL: u8 = 70;

/// Failures with a dedicated exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("missing artifact {}: {hint}", path.display())]
    Missing { path: PathBuf, hint: String },
    #[error("work directory {} is locked by another run; remove {} if no run is active", dir.display(), lock.display())]
    Locked { dir: PathBuf, lock: PathBuf },
}

#[derive(Debug, Parser)]
#[command(name = "vqevent", version, about = "Event detection, activity tiers and early high-activity prediction")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Flat `key=value` configuration file.
    #[arg(long, short = 'c', global = true)]
    config: Option<PathBuf>,
    /// Directory holding every artifact.
    #[arg(long, short = 'w', global = true)]
    workdir: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Fail on the first malformed input line instead of skipping it.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WindowArg {
    Full,
    Early,
    Both,
}

impl WindowArg {
    pub fn names(self) -> &'static [&'static str] {
        match self {
            WindowArg::Full => &["full"],
            WindowArg::Early => &["early"],
            WindowArg::Both => &["full", "early"],
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean a raw message file.
    ///
    /// Reads the `input` message file. Writes pool.jsonl (sorted by time,
    /// repeated ids removed), ingest_report.txt and ingest_report.json.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Mine keyword pairs from hourly headline batches.
    ///
    /// Reads the `headlines` file. Writes headline_tokens.jsonl and pairs.csv.
    DetectKeywords {
        #[arg(long)]
        headlines: Option<PathBuf>,
    },
    /// Group keyword pairs into events and attach their messages.
    ///
    /// Reads pairs.csv, headline_tokens.jsonl and pool.jsonl. Writes the
    /// events/ store and stopwords.txt (learned articulation words added).
    BuildEvents,
    /// Score true components against random ones per window.
    ///
    /// Reads pairs.csv, headline_tokens.jsonl and pool.jsonl. Writes
    /// validation.csv.
    ValidateEvents,
    /// Learn the interarrival codebook.
    ///
    /// Reads events/. Writes codebook.txt.
    LearnCodebook,
    /// Quantize every event against the codebook.
    ///
    /// Reads events/ and codebook.txt. Writes vectors.csv.
    Vectorize,
    /// Cluster event vectors into activity tiers.
    ///
    /// Reads vectors.csv. Writes tiers.csv and tier_summary.csv.
    ClusterTiers,
    /// Export plotting data for every tier.
    ///
    /// Reads events/, vectors.csv and tiers.csv. Writes figures/heatmap.csv,
    /// figures/histogram_<tier>.csv and figures/cdf_<tier>.csv.
    ExportFigures,
    /// Compute the feature catalog over full and early windows.
    ///
    /// Reads events/. Writes features_full.csv and features_early.csv.
    ExtractFeatures,
    /// Welch t-tests of every feature, high-activity against the rest.
    ///
    /// Reads features_full.csv and labels (tiers.csv or `--labels`).
    /// Writes comparison.csv.
    Compare {
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Fit a logistic model on every labeled event.
    ///
    /// Reads features_<window>.csv and labels. Writes model_<window>.txt.
    Train {
        #[arg(long, value_enum, default_value = "both")]
        window: WindowArg,
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Repeated train/validation/test splits with l2 tuning.
    ///
    /// Reads features_<window>.csv and labels. Writes report_<window>.csv.
    Evaluate {
        #[arg(long, value_enum, default_value = "both")]
        window: WindowArg,
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Generate a synthetic corpus with planted activity tiers.
    ///
    /// Writes events/ and labels.csv. With `--raw`, also writes
    /// synth_messages.jsonl and synth_headlines.jsonl for the ingest path.
    Synth {
        #[arg(long)]
        raw: bool,
    },
    /// Collection-level statistics of the events store.
    ///
    /// Reads events/. Writes stats.txt and stats.json.
    Stats,
}

fn configure(global: &GlobalArgs, command: &Command) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &global.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    for kv in &global.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k, v)?;
    }
    if let Some(w) = &global.workdir {
        cfg.workdir = w.clone();
    }
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if global.strict {
        cfg.strict = true;
    }
    match command {
        Command::Ingest { input: Some(p) } => cfg.input = Some(p.clone()),
        Command::DetectKeywords { headlines: Some(p) } => cfg.headlines = Some(p.clone()),
        Command::Compare { labels: Some(p) }
        | Command::Train { labels: Some(p), .. }
        | Command::Evaluate { labels: Some(p), .. } => cfg.labels = Some(p.clone()),
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::Usage(_) => EXIT_USAGE,
                CliError::Missing { .. } => EXIT_MISSING,
                CliError::Locked { .. } => EXIT_INTERNAL,
            };
        }
        if let Some(e) = cause.downcast_ref::<vqevent::Error>() {
            return match e {
                vqevent::Error::InvalidArgument(_) | vqevent::Error::TooFewDistinct { .. } => EXIT_USAGE,
                _ => EXIT_INTERNAL,
            };
        }
    }
    EXIT_INTERNAL
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = configure(&cli.global, &cli.command)
        .map_err(anyhow::Error::from)
        .and_then(|cfg| pipeline::run(&cli.command, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
