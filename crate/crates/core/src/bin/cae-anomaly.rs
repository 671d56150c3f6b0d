//! Command-line front end for the anomaly-detection pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use cae_anomaly::cae::{load_model, CaePreset};
use cae_anomaly::pipeline::{
    embed_stage, evaluate_from_files, features_stage, fit_svm_stage, load_manifest, read_features_csv, run_all, synth_stage, train_stage,
    ExperimentConfig, FeatureMode, PipelineError, Stage, CAE_FILE, CODES_FILE, CONFIG_KEYS, FEATURES_FILE,
};

#[derive(Parser)]
#[command(name = "cae-anomaly", version, about = "Autoencoder feature spaces and one-class SVM anomaly detection")]
struct Cli {
    /// `key = value` configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Dataset directory
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// error_metrics, pca_tsne or raw_encoded
    #[arg(long, global = true)]
    mode: Option<FeatureMode>,
    /// bae1, bae2 or mvtec
    #[arg(long, global = true)]
    preset: Option<CaePreset>,
    /// Extra `key=value` override, repeatable
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Suppress progress output
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the synthetic dataset and its manifest
    Synth,
    /// Train the autoencoder (or copy a pre-trained one)
    Train,
    /// Compute the feature rows for the selected mode
    Features,
    /// PCA and t-SNE over the encoder codes (pca_tsne mode)
    Embed,
    /// Fit the one-class SVM on validation features
    FitSvm,
    /// Score the test split and write the report
    Evaluate,
    /// Synthesize, train, extract features, fit and evaluate
    RunAll,
    /// Print the effective configuration
    Config {
        /// List every key with its description instead
        #[arg(long)]
        keys: bool,
    },
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    for o in &cli.overrides {
        let (k, v) = o.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got {o:?}"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(data) = &cli.data {
        cfg.dataset_dir = data.clone();
    }
    if let Some(mode) = cli.mode {
        cfg.feature_mode = mode;
    }
    if let Some(preset) = cli.preset {
        cfg.preset = preset;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli, cfg: &ExperimentConfig) -> Result<(), PipelineError> {
    let quiet = cli.quiet;
    let mut log = |msg: &str| {
        if !quiet {
            eprintln!("{msg}");
        }
    };
    let cae_path = || cfg.cae_model.clone().unwrap_or_else(|| cfg.output_dir.join(CAE_FILE));
    match &cli.command {
        Command::Synth => {
            let m = synth_stage(cfg)?;
            log(&format!("wrote {} samples to {}", m.records.len(), cfg.dataset_dir.display()));
        }
        Command::Train => {
            let manifest = load_manifest(cfg, Stage::Train)?;
            train_stage(cfg, &manifest, &mut log)?;
        }
        Command::Features => {
            let manifest = load_manifest(cfg, Stage::Features)?;
            let model = load_model(&cae_path()).map_err(|e| PipelineError::new(Stage::Features, e))?;
            features_stage(cfg, &manifest, &model, &mut log)?;
        }
        Command::Embed => {
            let manifest = load_manifest(cfg, Stage::Embed)?;
            let codes = read_features_csv(&cfg.output_dir.join(CODES_FILE)).map_err(|e| PipelineError::new(Stage::Embed, e))?;
            embed_stage(cfg, &manifest, &codes, &mut log)?;
        }
        Command::FitSvm => {
            let manifest = load_manifest(cfg, Stage::FitSvm)?;
            let features = read_features_csv(&cfg.output_dir.join(FEATURES_FILE)).map_err(|e| PipelineError::new(Stage::FitSvm, e))?;
            fit_svm_stage(cfg, &manifest, &features, &mut log)?;
        }
        Command::Evaluate => print!("{}", evaluate_from_files(cfg)?.to_text()),
        Command::RunAll => print!("{}", run_all(cfg, &mut log)?.to_text()),
        Command::Config { .. } => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Config { keys: true } = cli.command {
        for (k, help) in CONFIG_KEYS {
            println!("{k:<30} {help}");
        }
        return ExitCode::SUCCESS;
    }
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: config stage: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Command::Config { .. } = cli.command {
        print!("{}", cfg.to_config_string());
        return ExitCode::SUCCESS;
    }
    match run(&cli, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
