//! `wsd`: build datasets, train, predict and score from one config file.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Error classes and their exit codes.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Data(anyhow::Error),
    Training(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Training(_) => 4,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Data(e) | Failure::Training(e) => e,
        }
    }
}

#[derive(Parser)]
#[command(name = "wsd", version, about = "Gloss-matching word sense disambiguation")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log more (repeatable); logs go to standard error.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct ConfigArg {
    /// Run config (TOML, or JSON with a .json extension).
    #[arg(short, long)]
    pub config: PathBuf,
}

#[derive(Args, Clone)]
pub struct SourceArgs {
    /// Read `<name>.key.txt` predictions from this directory instead of
    /// running the model.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Checkpoint to run (default: `<out>/model.ckpt`).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Write the JSON report here instead of standard output.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the context-gloss, context-hypernym and triplet training files.
    BuildDatasets {
        #[command(flatten)]
        config: ConfigArg,
        /// Copies of each positive context-gloss pair.
        #[arg(long)]
        oversample: Option<usize>,
        /// Leave out gloss-gloss pairs.
        #[arg(long)]
        no_gloss_gloss: bool,
    },
    /// Train the encoder with a stage preset.
    Train {
        #[command(flatten)]
        config: ConfigArg,
        /// Stage preset, overriding the config.
        #[arg(long)]
        preset: Option<String>,
        /// Epochs per stage, overriding the config.
        #[arg(long)]
        epochs: Option<usize>,
        /// Seed for shuffling and initialization, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write key-file predictions for the test and dev corpora, or one corpus.
    Predict {
        #[command(flatten)]
        config: ConfigArg,
        /// Checkpoint to run (default: `<out>/model.ckpt`).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Predict this corpus only.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// With --corpus, write here instead of standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Gloss index file; loaded when present, otherwise built and saved.
        #[arg(long)]
        index: Option<PathBuf>,
    },
    /// Score predictions on the test and dev corpora.
    Evaluate {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        source: SourceArgs,
        /// Corpus names left out of the overall score (repeatable).
        #[arg(long)]
        exclude_from_all: Vec<String>,
        /// Leave the dev corpus out of the overall score.
        #[arg(long)]
        exclude_dev: bool,
        /// Print a text table instead of JSON.
        #[arg(long)]
        table: bool,
    },
    /// Score seen and unseen test instances separately.
    SplitAnalysis {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Most-frequent-sense predictions and scores.
    MfsBaseline {
        #[command(flatten)]
        config: ConfigArg,
        /// Write the JSON report here instead of standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Generate a synthetic lexicon and corpora plus a config to run them.
    GenerateToy {
        /// Target directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.into()))?;
    }
    match cli.command {
        Command::BuildDatasets {
            config,
            oversample,
            no_gloss_gloss,
        } => commands::build_datasets(&config.config, oversample, no_gloss_gloss),
        Command::Train {
            config,
            preset,
            epochs,
            seed,
        } => commands::train(&config.config, preset, epochs, seed),
        Command::Predict {
            config,
            checkpoint,
            corpus,
            output,
            index,
        } => commands::predict(&config.config, checkpoint, corpus, output, index),
        Command::Evaluate {
            config,
            source,
            exclude_from_all,
            exclude_dev,
            table,
        } => commands::evaluate(&config.config, &source, exclude_from_all, exclude_dev, table),
        Command::SplitAnalysis { config, source } => commands::split_analysis(&config.config, &source),
        Command::MfsBaseline { config, output } => commands::mfs_baseline(&config.config, output),
        Command::GenerateToy { out, seed } => commands::generate_toy(&out, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
