//! Command-line front end for the classification pipeline.
//!
//! Exit codes: 0 on success, 1 for runtime or data errors, 2 for usage and
//! validation errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fcmdnn_core::dataset::{gen_synthetic, load_dataset, write_dataset, SyntheticManifest};
use fcmdnn_core::error::Error;
use fcmdnn_core::pipeline::{
    evaluate_model, run_experiment_full, summary_csv_header, summary_csv_row, write_run_artifacts,
    ExperimentConfig, FoldModel, ModelKind, NetworkOverrides, RunReport,
};
use fcmdnn_core::dataset;
use fcmdnn_core::preprocess::{resize, Normalization};

const SEED_ENV_VAR: &str = "FCMDNN_SEED";

#[derive(Parser)]
#[command(
    name = "fcmdnn",
    about = "Grayscale image classification with NN, DNN, and FCM-DNN models",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset in the healthy/sick layout
    Synth(SynthArgs),
    /// Resize a dataset and write it back as 8-bit PGM files
    Preprocess(PreprocessArgs),
    /// Train a model with K-fold cross-validation and write run artifacts
    Train(TrainArgs),
    /// Re-run prediction with frozen fold models over a dataset
    Evaluate(EvaluateArgs),
    /// Summarize saved run reports as a metrics table
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Healthy sample count
    #[arg(long)]
    healthy: usize,
    /// Sick sample count
    #[arg(long)]
    sick: usize,
    /// Image side length in pixels (>= 4)
    #[arg(long)]
    side: usize,
    /// Generator seed
    #[arg(long)]
    seed: u64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Input dataset directory (healthy/ + sick/)
    #[arg(long)]
    data: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Target side length
    #[arg(long, default_value_t = 100)]
    side: usize,
}

#[derive(Args)]
struct TrainArgs {
    /// Model kind: nn, dnn, or fcm-dnn
    #[arg(long)]
    model: String,
    /// Dataset directory
    #[arg(long)]
    data: PathBuf,
    /// Fold count (reference runs use 5, 7, or 10)
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// JSON config file overlaying the model defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (falls back to FCMDNN_SEED, then 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for run artifacts
    #[arg(long)]
    out: PathBuf,
    /// Fit normalization and clustering on the full dataset before fold
    /// splitting instead of per fold on non-test data
    #[arg(long)]
    paper_order: bool,
    /// Record which sample ids reached each fitting path
    #[arg(long)]
    audit: bool,
    /// Disable class-stratified fold assignment
    #[arg(long)]
    no_stratify: bool,
    /// Worker threads for fold execution
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory holding model_fold_N.json files
    #[arg(long)]
    model_dir: PathBuf,
    /// Dataset directory to evaluate on
    #[arg(long)]
    data: PathBuf,
    /// Evaluate a single fold's model instead of every model found
    #[arg(long)]
    fold: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run report JSON files (run_report.json from train)
    #[arg(long, required = true, num_args = 1..)]
    run: Vec<PathBuf>,
    /// Write the combined table as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Partial experiment configuration accepted via `--config`. Every field is
/// optional; present fields replace the model defaults.
#[derive(Debug, Default, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigOverlay {
    clusters_per_class: Option<usize>,
    stratify: Option<bool>,
    preprocess: PreprocessOverlay,
    fcm: FcmOverlay,
    network: NetworkOverrides,
}

#[derive(Debug, Default, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PreprocessOverlay {
    target_side: Option<usize>,
    normalization: Option<Normalization>,
}

#[derive(Debug, Default, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FcmOverlay {
    fuzzifier: Option<f64>,
    max_iterations: Option<usize>,
    min_gain: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Preprocess(args) => cmd_preprocess(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<(), Error> {
    let dataset = gen_synthetic(args.healthy, args.sick, args.side, args.seed)?;
    write_dataset(&dataset, &args.out)?;
    let manifest = SyntheticManifest {
        recipe_version: dataset::RECIPE_VERSION,
        n_healthy: args.healthy,
        n_sick: args.sick,
        side: args.side,
        seed: args.seed,
    };
    manifest.write_json(&args.out.join("manifest.json"))?;
    println!(
        "wrote {} images ({} healthy, {} sick) to {}",
        dataset.len(),
        args.healthy,
        args.sick,
        args.out.display()
    );
    Ok(())
}

fn cmd_preprocess(args: PreprocessArgs) -> Result<(), Error> {
    if args.side == 0 {
        return Err(Error::InvalidDimension("side must be >= 1".into()));
    }
    let dataset = load_dataset(&args.data)?;
    let resized = dataset::Dataset {
        samples: dataset
            .samples
            .iter()
            .map(|s| resize(s, args.side))
            .collect::<Result<_, _>>()?,
        ..dataset
    };
    // Intensities are written back as rounded 8-bit values; [0, 1]
    // normalization happens at training time.
    write_dataset(&resized, &args.out)?;
    println!(
        "resized {} images to {}x{} in {}",
        resized.len(),
        args.side,
        args.side,
        args.out.display()
    );
    Ok(())
}

fn master_seed(flag: Option<u64>) -> Result<u64, Error> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV_VAR) {
        Ok(text) => text.parse().map_err(|_| {
            Error::Config(format!("{SEED_ENV_VAR} must be an unsigned integer, got `{text}`"))
        }),
        Err(_) => Ok(0),
    }
}

fn load_overlay(path: &Path) -> Result<ConfigOverlay, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))
}

fn cmd_train(args: TrainArgs) -> Result<(), Error> {
    let model: ModelKind = args.model.parse()?;
    let seed = master_seed(args.seed)?;
    let mut config = ExperimentConfig::new(model, args.folds, seed);
    config.paper_order = args.paper_order;
    config.audit = args.audit;
    config.stratify = !args.no_stratify;
    config.jobs = args.jobs.max(1);

    if let Some(path) = &args.config {
        let overlay = load_overlay(path)?;
        if let Some(c) = overlay.clusters_per_class {
            config.clusters_per_class = c;
        }
        if let Some(s) = overlay.stratify {
            config.stratify = s;
        }
        if let Some(side) = overlay.preprocess.target_side {
            config.preprocess.target_side = side;
        }
        if let Some(norm) = overlay.preprocess.normalization {
            config.preprocess.normalization = norm;
        }
        if let Some(f) = overlay.fcm.fuzzifier {
            config.fcm.fuzzifier = f;
        }
        if let Some(i) = overlay.fcm.max_iterations {
            config.fcm.max_iterations = i;
        }
        if let Some(g) = overlay.fcm.min_gain {
            config.fcm.min_gain = g;
        }
        config.network = overlay.network;
    }

    let dataset = load_dataset(&args.data)?;
    let output = run_experiment_full(&dataset, &config)?;
    for warning in &output.report.warnings {
        eprintln!("warning: {warning}");
    }
    write_run_artifacts(&args.out, &output)?;
    println!("{}", summary_csv_header());
    println!(
        "{}",
        summary_csv_row(output.report.model, output.report.folds, &output.report.pooled)
    );
    println!("artifacts written to {}", args.out.display());
    Ok(())
}

fn find_fold_models(dir: &Path, only: Option<usize>) -> Result<Vec<(usize, PathBuf)>, Error> {
    let mut found = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = match path.file_name().and_then(|n| n.to_str()) {
            Some(n) => n,
            None => continue,
        };
        if let Some(fold) = name
            .strip_prefix("model_fold_")
            .and_then(|rest| rest.strip_suffix(".json"))
            .and_then(|digits| digits.parse::<usize>().ok())
        {
            if only.is_none_or(|f| f == fold) {
                found.push((fold, path));
            }
        }
    }
    found.sort();
    if found.is_empty() {
        return Err(Error::Config(format!(
            "no model_fold_N.json files in {}",
            dir.display()
        )));
    }
    Ok(found)
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), Error> {
    let models = find_fold_models(&args.model_dir, args.fold)?;
    let dataset = load_dataset(&args.data)?;
    let mut rows = Vec::new();
    for (fold, path) in models {
        let model = FoldModel::read_json(&path)?;
        let evaluation = evaluate_model(&model, &dataset)?;
        rows.push(serde_json::json!({
            "fold": fold,
            "model": model.model.name(),
            "metrics": evaluation.metrics,
        }));
    }
    println!("{}", serde_json::to_string_pretty(&rows)?);
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), Error> {
    let mut lines = vec![summary_csv_header().to_string()];
    for path in &args.run {
        let report = RunReport::from_json(&std::fs::read_to_string(path)?)?;
        lines.push(summary_csv_row(report.model, report.folds, &report.pooled));
    }
    let table = lines.join("\n");
    println!("{table}");
    if let Some(csv_path) = &args.csv {
        std::fs::write(csv_path, format!("{table}\n"))?;
        eprintln!("csv written to {}", csv_path.display());
    }
    Ok(())
}
