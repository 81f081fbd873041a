use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hmc_core::config::RunConfig;
use hmc_core::pipeline::Pipeline;

/// Hierarchical multi-label node classification.
///
/// Configuration is a TOML file; every key has a default except the three
/// input paths:
///
///   [input]       edges, annotations, hierarchy (.tsv or .obo), nodes (optional)
///   [classes]     min_size = 5, max_size = 300
///   [cv]          folds = 5
///   [walk]        p = 1, q = 1, walk_length = 30, walks_per_node = 10
///   [embedding]   dimension = 64, window = 5, negative_samples = 5, epochs = 5,
///                 learning_rate = 0.025, min_learning_rate = 0.0001
///   [smote]       enabled = true, k_neighbors = 5, target_ratio = 1.0
///   [classifier]  kind = "builtin-logistic" | "external",
///                 learning_rates = [0.01, 0.05, 0.1], l2_strengths = [0, 0.1, 1],
///                 epochs = [50, 200], batch_size = 32, command = []
///   [features]    clustering = true
///   [run]         seed = 42, output = "out", workers = 0 (all cores),
///                 baseline = false, widen = false
///
/// Exit codes: 0 success, 1 input error, 2 pipeline error.
/// Set HMC_LOG (error, warn, info, debug, trace) for log output.
#[derive(Parser)]
#[command(name = "hmc", version, verbatim_doc_comment)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file.
    #[arg(long, short, global = true, default_value = "hmc.toml")]
    config: PathBuf,

    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides `run.output`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overrides `run.workers`.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Also run a baseline (`hbn`).
    #[arg(long, global = true, value_parser = ["hbn"])]
    baseline: Option<String>,

    /// Score nodes outside each sub-hierarchy's subgraph too.
    #[arg(long, global = true)]
    widen: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Normalize the class DAG into a tree.
    Normalize,
    /// Split the tree into sub-hierarchies.
    Split,
    /// Compute topological node features.
    Features,
    /// Compute node2vec embeddings.
    Embed,
    /// Train one classifier per class, top-down.
    Train,
    /// Apply thresholds and emit consistent predictions.
    Predict,
    /// Evaluate predictions.
    Eval,
    /// Run the HBN-style baseline with the engine's folds.
    Baseline,
    /// All stages in order.
    Run,
}

impl Command {
    fn stage(self) -> Option<&'static str> {
        Some(match self {
            Command::Normalize => "normalize",
            Command::Split => "split",
            Command::Features => "features",
            Command::Embed => "embed",
            Command::Train => "train",
            Command::Predict => "predict",
            Command::Eval => "eval",
            Command::Baseline => "baseline",
            Command::Run => return None,
        })
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HMC_LOG", "warn")).init();
    let cli = Cli::parse();

    let mut cfg = match RunConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: stage `ingest`: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.run.output = o;
    }
    if let Some(w) = cli.workers {
        cfg.run.workers = w;
    }
    cfg.run.baseline |= cli.baseline.is_some();
    cfg.run.widen |= cli.widen;

    let result = Pipeline::new(cfg).and_then(|p| match cli.command.stage() {
        Some(stage) => p.run_stage(stage),
        None => p.run().map(|report| {
            println!("root\tclasses\ttargets\tnodes");
            for r in &report.split {
                println!("{}\t{}\t{}\t{}", r.root, r.classes, r.targets, r.nodes);
            }
            println!("artifacts in {}", report.output.display());
        }),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}
