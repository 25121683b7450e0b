//! `tsfuse`: end-to-end harness for the regime-aware fusion experiments.

mod experiment;
mod pipeline;
mod plots;
mod report;
mod store;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use experiment::{ExperimentConfig, GridKind, ModelFamily, Selection};
use pipeline::Ctx;

#[derive(Parser)]
#[command(name = "tsfuse", version, about = "Multi-representation time series fusion toolkit")]
struct Cli {
    /// Root directory containing the datasets (falls back to $TSFUSE_DATA).
    #[arg(long, global = true)]
    data_root: Option<PathBuf>,

    /// Datasets to process (default: all discovered under the data root).
    #[arg(long, global = true, value_delimiter = ',')]
    datasets: Vec<String>,

    /// Model families to train / compare.
    #[arg(long = "family", global = true, value_delimiter = ',')]
    families: Vec<ModelFamily>,

    /// Output directory for results, reports and plots.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Master random seed.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Number of outer cross-validation folds.
    #[arg(long, global = true, default_value_t = 5)]
    folds: usize,

    /// Hyperparameter grid to search.
    #[arg(long, global = true, value_enum, default_value_t = GridKind::Full)]
    grid: GridKind,

    /// How the winning grid config is selected.
    #[arg(long, global = true, value_enum, default_value_t = Selection::Nested)]
    selection: Selection,

    /// Skip (dataset, family) cells whose stored results verify.
    #[arg(long, global = true)]
    resume: bool,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// JSON file overriding the experiment config (folds/seed/grid/selection).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load datasets and write a summary CSV.
    Ingest,
    /// Report feature-matrix dimensions for each representation.
    Features,
    /// Grid-search and train all requested (dataset, family) cells.
    Train,
    /// Print stored per-cell accuracies.
    Evaluate,
    /// Compute the dataset meta-feature table.
    Metafeatures,
    /// Cluster datasets into regimes from their meta-features.
    Cluster,
    /// Paired statistics of the fusion family against the ROCKET baseline.
    Compare,
    /// Fit the gain surrogate and export per-dataset attributions.
    Attribute,
    /// Sample-level rescued/hurt analysis with gate shifts.
    Casestudy,
    /// Emit all tables and plots from stored artifacts.
    Report,
    /// Run the whole pipeline end to end.
    All,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker threads")?;
    }

    let mut cfg = ExperimentConfig {
        folds: cli.folds,
        seed: cli.seed,
        grid: cli.grid,
        selection: cli.selection,
    };
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        cfg = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
    }

    let families = if cli.families.is_empty() {
        vec![ModelFamily::F3, ModelFamily::SoloRocket]
    } else {
        cli.families.clone()
    };

    let ctx = Ctx {
        data_root: cli
            .data_root
            .clone()
            .or_else(|| std::env::var_os("TSFUSE_DATA").map(PathBuf::from)),
        datasets: cli.datasets.clone(),
        families,
        out: cli.out.clone(),
        cfg,
        resume: cli.resume,
    };

    match cli.command {
        Command::Ingest => pipeline::cmd_ingest(&ctx),
        Command::Features => pipeline::cmd_features(&ctx),
        Command::Train => pipeline::cmd_train(&ctx),
        Command::Evaluate => pipeline::cmd_evaluate(&ctx),
        Command::Metafeatures => pipeline::cmd_metafeatures(&ctx),
        Command::Cluster => pipeline::cmd_cluster(&ctx),
        Command::Compare => pipeline::cmd_compare(&ctx),
        Command::Attribute => pipeline::cmd_attribute(&ctx),
        Command::Casestudy => pipeline::cmd_casestudy(&ctx),
        Command::Report => pipeline::cmd_report(&ctx),
        Command::All => pipeline::cmd_all(&ctx),
    }
}
