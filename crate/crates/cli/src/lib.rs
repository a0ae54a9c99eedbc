//! Command-line front end: ingestion, two-stage search, evaluation and prediction.

pub mod artifact;
pub mod commands;
pub mod config;
pub mod report;

use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cnnmil::MetaFeatures;

use crate::config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "cnnmil", version, about = "Multi-instance classification with an evolved Citation-kNN ensemble")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for both search stages, overriding the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Stratified k-fold validation instead of leave-one-out.
    #[arg(long, global = true)]
    pub kfold: Option<usize>,
    /// Training dataset: Musk CSV or canonical JSON.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and normalize a dataset, writing canonical JSON.
    Ingest {
        /// Input file; defaults to --dataset.
        input: Option<PathBuf>,
    },
    /// Search CNN parameters and feature subsets, writing the Pareto front.
    Optimize,
    /// Build the meta dataset from a front, tune the combiner, write the model.
    Stack {
        /// Front file written by `optimize`.
        #[arg(long)]
        front: PathBuf,
        /// Member outputs fed to the combiner.
        #[arg(long, value_enum, default_value = "labels")]
        features: FeatureKind,
    },
    /// Estimate a model's accuracy on its training set or on a labeled bag file.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        /// Labeled bags to score instead of resampling the training set.
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Print `<bag-id>\t<+1|-1>` for each requested bag.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Training bag to classify (repeatable).
        #[arg(long = "bag", conflicts_with = "bags")]
        ids: Vec<String>,
        /// File of bags to classify (Musk CSV or canonical JSON).
        #[arg(long)]
        bags: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FeatureKind {
    Labels,
    Scores,
}

impl From<FeatureKind> for MetaFeatures {
    fn from(k: FeatureKind) -> Self {
        match k {
            FeatureKind::Labels => MetaFeatures::Labels,
            FeatureKind::Scores => MetaFeatures::Scores,
        }
    }
}

/// Runs one parsed invocation on a worker pool sized by `--jobs`.
pub fn run(cli: Cli, stdout: &mut (dyn Write + Send)) -> Result<()> {
    let overrides = Overrides {
        seed: cli.global.seed,
        out: cli.global.out.clone(),
        kfold: cli.global.kfold,
        dataset: cli.global.dataset.clone(),
    };
    let config = RunConfig::load(cli.global.config.as_deref(), &overrides)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.global.jobs {
        anyhow::ensure!(jobs > 0, "--jobs must be at least 1");
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().context("starting worker pool")?;
    pool.install(|| dispatch(&config, cli.command, stdout))
}

fn dispatch(config: &RunConfig, command: Command, stdout: &mut dyn Write) -> Result<()> {
    match command {
        Command::Ingest { input } => commands::ingest(config, input.as_deref(), stdout).map(drop),
        Command::Optimize => commands::optimize(config, stdout).map(drop),
        Command::Stack { front, features } => commands::stack(config, &front, features.into(), stdout).map(drop),
        Command::Evaluate { model, test } => commands::evaluate(config, &model, test.as_deref(), stdout).map(drop),
        Command::Predict { model, ids, bags } => {
            let query = match &bags {
                Some(path) => commands::Query::File(path),
                None => {
                    anyhow::ensure!(!ids.is_empty(), "give --bag <id> or --bags <file>");
                    commands::Query::Ids(&ids)
                }
            };
            commands::predict(config, &model, query, stdout)
        }
    }
}
