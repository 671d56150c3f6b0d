//! Stage functions and the end-to-end driver.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::eval::{auc, class_stats, confusion};
use super::files::{write_features_csv, write_scores_csv, FeatureRow, ScoreRow};
use super::report::{read_kv, EvaluationReport, SubclassAuc};
use super::svg::write_scatter_svg;
use super::{read_features_csv, ExperimentConfig, FeatureMode, PipelineError};
use crate::cae::{images_to_tensor, init_model, load_model as load_cae, save_model as save_cae, train_with_progress, CaeModel, EpochStats, Tensor4};
use crate::dimred::{pca_fit, tsne_embed};
use crate::image::load_image;
use crate::metrics::{build_error_features, LabeledImage};
use crate::ocsvm::{gamma_scale, load_model as load_svm, ocsvm_fit, save_model as save_svm, Gamma, OcSvmConfig, OcSvmModel};
use crate::synth::{synth_dataset, DatasetManifest, DefectKind, Split};

pub const CONFIG_FILE: &str = "config.txt";
pub const CAE_FILE: &str = "cae.caem";
pub const HISTORY_FILE: &str = "training.csv";
pub const CODES_FILE: &str = "codes.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const EMBED_FILE: &str = "embedding.kv";
pub const OCSVM_FILE: &str = "ocsvm.ocsv";
pub const SVM_FIT_FILE: &str = "svm_fit.kv";
pub const SCORES_FILE: &str = "scores.csv";
pub const SCATTER_FILE: &str = "scatter.svg";
pub const REPORT_TXT_FILE: &str = "report.txt";
pub const REPORT_KV_FILE: &str = "report.kv";

/// ν values and multipliers of the `scale` γ swept in the report grid.
const GRID_NU: [f64; 3] = [0.05, 0.1, 0.2];
const GRID_GAMMA_FACTOR: [f64; 3] = [0.1, 1.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Synth,
    Train,
    Features,
    Embed,
    FitSvm,
    Evaluate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Synth => "synth",
            Stage::Train => "train",
            Stage::Features => "features",
            Stage::Embed => "embed",
            Stage::FitSvm => "fit-svm",
            Stage::Evaluate => "evaluate",
        })
    }
}

/// One cell of the ν × γ sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub nu: f64,
    pub gamma_factor: f64,
    pub gamma: f64,
    pub auc: f64,
    pub converged: bool,
}

/// t-SNE diagnostics carried into the report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbedStats {
    pub kl: f64,
    pub kl_after_exaggeration: f64,
}

type Log<'a> = &'a mut dyn FnMut(&str);

macro_rules! at {
    ($stage:expr, $e:expr) => {
        $e.map_err(|e| PipelineError::new($stage, e))
    };
}

fn out_path(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

fn ensure_out(cfg: &ExperimentConfig, stage: Stage) -> Result<(), PipelineError> {
    at!(stage, fs::create_dir_all(&cfg.output_dir))
}

/// Renders the dataset described by `cfg` into `dataset_dir`.
pub fn synth_stage(cfg: &ExperimentConfig) -> Result<DatasetManifest, PipelineError> {
    at!(Stage::Config, cfg.validate())?;
    at!(Stage::Synth, synth_dataset(&cfg.synth_params(), cfg.counts, cfg.nok_ratio, &cfg.dataset_dir))
}

pub fn load_manifest(cfg: &ExperimentConfig, stage: Stage) -> Result<DatasetManifest, PipelineError> {
    let path = cfg.manifest_path();
    DatasetManifest::load(&path).map_err(|e| PipelineError::new(stage, format!("{}: {e}", path.display())))
}

/// Loads every image of `split`, in manifest order.
pub fn load_split_images(cfg: &ExperimentConfig, manifest: &DatasetManifest, split: Split, stage: Stage) -> Result<Vec<LabeledImage>, PipelineError> {
    let base = cfg.manifest_path().parent().map(Path::to_path_buf).unwrap_or_default();
    manifest
        .by_split(split)
        .map(|r| {
            let image = at!(stage, load_image(base.join(&r.path)))?;
            if image.height() != cfg.image_size || image.width() != cfg.image_size || image.channels() != 3 {
                return Err(PipelineError::new(
                    stage,
                    format!("{} is {}x{}x{}, expected {}x{}x3", r.sample_id, image.height(), image.width(), image.channels(), cfg.image_size, cfg.image_size),
                ));
            }
            Ok(LabeledImage { sample_id: r.sample_id.clone(), label: r.label, image })
        })
        .collect()
}

fn to_tensor(samples: &[LabeledImage], stage: Stage) -> Result<Tensor4<f32>, PipelineError> {
    let refs: Vec<_> = samples.iter().map(|s| &s.image).collect();
    at!(stage, images_to_tensor::<f32>(&refs))
}

/// Trains the autoencoder on train OK images (epoch selection on val), or
/// loads `cae_model` when set. Writes `cae.caem` and `training.csv`.
pub fn train_stage(cfg: &ExperimentConfig, manifest: &DatasetManifest, log: Log) -> Result<CaeModel<f32>, PipelineError> {
    const S: Stage = Stage::Train;
    ensure_out(cfg, S)?;
    let model = if let Some(path) = &cfg.cae_model {
        let model = at!(S, load_cae(path))?;
        if model.input_size() != cfg.image_size {
            return Err(PipelineError::new(S, format!("{} expects {}px inputs, config says {}", path.display(), model.input_size(), cfg.image_size)));
        }
        log(&format!("loaded autoencoder {}", path.display()));
        model
    } else {
        let train = to_tensor(&load_split_images(cfg, manifest, Split::Train, S)?, S)?;
        let val = to_tensor(&load_split_images(cfg, manifest, Split::Val, S)?, S)?;
        let init = at!(S, init_model(cfg.preset, cfg.image_size, cfg.init_seed()))?;
        log(&format!("training {} ({} parameters) on {} images", cfg.preset, init.params().len(), train.batch()));
        let outcome = at!(
            S,
            train_with_progress(init, &train, Some(&val), &cfg.train_config(), |e: &EpochStats| {
                log(&format!("epoch {:>3}  train {:.6}  val {:.6}", e.epoch, e.train_loss, e.val_loss))
            })
        )?;
        let mut csv = String::from("epoch,train_loss,val_loss\n");
        for e in &outcome.history {
            csv.push_str(&format!("{},{:?},{:?}\n", e.epoch, e.train_loss, e.val_loss));
        }
        at!(S, fs::write(out_path(cfg, HISTORY_FILE), csv))?;
        log(&format!("best epoch {}", outcome.best_epoch));
        outcome.model
    };
    at!(S, save_cae(&model, &out_path(cfg, CAE_FILE)))?;
    Ok(model)
}

fn encode_rows(model: &CaeModel<f32>, samples: &[LabeledImage], batch: usize, stage: Stage) -> Result<Vec<FeatureRow>, PipelineError> {
    let mut rows = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(batch.max(1)) {
        let code = at!(stage, model.encode(&to_tensor(chunk, stage)?))?;
        for (i, s) in chunk.iter().enumerate() {
            rows.push(FeatureRow { sample_id: s.sample_id.clone(), label: s.label, values: code.sample(i).iter().map(|&v| v as f64).collect() });
        }
    }
    Ok(rows)
}

fn split_of(manifest: &DatasetManifest) -> HashMap<&str, Split> {
    manifest.records.iter().map(|r| (r.sample_id.as_str(), r.split)).collect()
}

fn is_fit_row(splits: &HashMap<&str, Split>, r: &FeatureRow) -> bool {
    splits.get(r.sample_id.as_str()) == Some(&Split::Val) && r.label == DefectKind::Ok
}

/// Z-scores every column with the mean and standard deviation of the fit
/// rows (val OK). Columns with zero spread are only centred.
fn standardize(rows: &mut [FeatureRow], manifest: &DatasetManifest) {
    let splits = split_of(manifest);
    let fit: Vec<&[f64]> = rows.iter().filter(|r| is_fit_row(&splits, r)).map(|r| r.values.as_slice()).collect();
    if fit.is_empty() {
        return;
    }
    let dim = fit[0].len();
    let st = class_stats(fit, dim);
    for r in rows.iter_mut() {
        for (j, v) in r.values.iter_mut().enumerate() {
            let sd = st.variances[j].sqrt();
            *v = if sd > 0.0 { (*v - st.means[j]) / sd } else { *v - st.means[j] };
        }
    }
}

/// Computes the feature rows for the configured mode.
///
/// `error_metrics` and `raw_encoded` write `features.csv` for val + test.
/// `pca_tsne` writes the codes of every split to `codes.csv`; the embed
/// stage turns those into `features.csv`.
pub fn features_stage(cfg: &ExperimentConfig, manifest: &DatasetManifest, model: &CaeModel<f32>, log: Log) -> Result<Vec<FeatureRow>, PipelineError> {
    const S: Stage = Stage::Features;
    ensure_out(cfg, S)?;
    let batch = cfg.train.batch_size;
    let mut samples = Vec::new();
    samples.extend(load_split_images(cfg, manifest, Split::Val, S)?);
    samples.extend(load_split_images(cfg, manifest, Split::Test, S)?);
    let mut rows = match cfg.feature_mode {
        FeatureMode::ErrorMetrics => at!(S, build_error_features(model, &samples, &cfg.ssim, batch))?
            .into_iter()
            .map(|p| FeatureRow { sample_id: p.sample_id, label: p.label, values: vec![p.l2, p.ssim] })
            .collect(),
        FeatureMode::PcaTsne | FeatureMode::RawEncoded => encode_rows(model, &samples, batch, S)?,
    };
    log(&format!("{} feature rows of dimension {}", rows.len(), rows.first().map_or(0, |r| r.values.len())));
    if cfg.feature_mode == FeatureMode::PcaTsne {
        at!(S, write_features_csv(&rows, &out_path(cfg, CODES_FILE)))?;
    } else {
        if cfg.standardize_features {
            standardize(&mut rows, manifest);
        }
        at!(S, write_features_csv(&rows, &out_path(cfg, FEATURES_FILE)))?;
    }
    Ok(rows)
}

/// PCA and t-SNE both fitted on the val + test codes jointly.
/// Writes `features.csv` and `embedding.kv`.
pub fn embed_stage(cfg: &ExperimentConfig, manifest: &DatasetManifest, codes: &[FeatureRow], log: Log) -> Result<(Vec<FeatureRow>, EmbedStats), PipelineError> {
    const S: Stage = Stage::Embed;
    if cfg.feature_mode != FeatureMode::PcaTsne {
        return Err(PipelineError::new(S, format!("embedding applies to pca_tsne only, mode is {}", cfg.feature_mode)));
    }
    ensure_out(cfg, S)?;
    let splits = split_of(manifest);
    let split = |r: &FeatureRow| splits.get(r.sample_id.as_str()).copied().ok_or_else(|| PipelineError::new(S, format!("{} is not in the manifest", r.sample_id)));
    let d = codes.first().map_or(0, |r| r.values.len());
    let matrix = |rows: &[&FeatureRow]| DMatrix::from_fn(rows.len(), d, |i, j| rows[i].values[j]);
    let mut embed_rows = Vec::new();
    for r in codes {
        if split(r)? != Split::Train {
            embed_rows.push(r);
        }
    }
    let pca = at!(S, pca_fit(&matrix(&embed_rows), cfg.pca_dims))?;
    let reduced = at!(S, pca.transform(&matrix(&embed_rows)))?;
    log(&format!("PCA {d} -> {} keeps {:.4} of the variance", cfg.pca_dims, pca.explained_variance_ratio().iter().sum::<f64>()));
    let emb = at!(S, tsne_embed(&reduced, &cfg.tsne_config()))?;
    log(&format!("t-SNE over {} rows, KL {:.6}", embed_rows.len(), emb.kl_divergence));
    let mut rows: Vec<FeatureRow> =
        embed_rows.iter().zip(&emb.points).map(|(r, p)| FeatureRow { sample_id: r.sample_id.clone(), label: r.label, values: p.to_vec() }).collect();
    if cfg.standardize_features {
        standardize(&mut rows, manifest);
    }
    at!(S, write_features_csv(&rows, &out_path(cfg, FEATURES_FILE)))?;
    let stats = EmbedStats { kl: emb.kl_divergence, kl_after_exaggeration: emb.kl_after_exaggeration };
    at!(S, fs::write(out_path(cfg, EMBED_FILE), format!("kl={:?}\nkl_after_exaggeration={:?}\n", stats.kl, stats.kl_after_exaggeration)))?;
    Ok((rows, stats))
}

fn fit_matrix(rows: &[FeatureRow], manifest: &DatasetManifest) -> Vec<Vec<f64>> {
    let splits = split_of(manifest);
    rows.iter().filter(|r| is_fit_row(&splits, r)).map(|r| r.values.clone()).collect()
}

/// Fits the one-class SVM on the val OK rows. Writes `ocsvm.ocsv` and the
/// solver diagnostics `svm_fit.kv`.
pub fn fit_svm_stage(cfg: &ExperimentConfig, manifest: &DatasetManifest, features: &[FeatureRow], log: Log) -> Result<OcSvmModel, PipelineError> {
    const S: Stage = Stage::FitSvm;
    ensure_out(cfg, S)?;
    let x = fit_matrix(features, manifest);
    let model = at!(S, ocsvm_fit(&x, &cfg.ocsvm_config()))?;
    log(&format!(
        "one-class SVM on {} rows: {} support vectors, {} updates, {}",
        x.len(),
        model.alphas.len(),
        model.iterations,
        if model.converged { "converged" } else { "not converged" }
    ));
    at!(S, save_svm(&model, &out_path(cfg, OCSVM_FILE)))?;
    let diag = format!("converged={}\nresidual={:?}\niterations={}\n", model.converged, model.residual, model.iterations);
    at!(S, fs::write(out_path(cfg, SVM_FIT_FILE), diag))?;
    Ok(model)
}

/// Test AUC of SVMs fitted on `fit` for each ν in the grid and γ equal to
/// `factor * gamma_scale(fit)`. ν values with `ν·n < 1` are skipped.
pub fn nu_gamma_grid(fit: &[Vec<f64>], test: &[FeatureRow]) -> Result<Vec<GridCell>, PipelineError> {
    const S: Stage = Stage::Evaluate;
    let base = at!(S, gamma_scale(fit))?;
    let positive: Vec<bool> = test.iter().map(|r| !r.label.is_ok()).collect();
    let mut cells = Vec::new();
    for nu in GRID_NU.into_iter().filter(|nu| nu * fit.len() as f64 >= 1.0 - 1e-12) {
        for factor in GRID_GAMMA_FACTOR {
            let gamma = factor * base;
            let cfg = OcSvmConfig { nu, gamma: Gamma::Value(gamma), ..OcSvmConfig::default() };
            let model = at!(S, ocsvm_fit(fit, &cfg))?;
            let scores = test.iter().map(|r| model.decision(&r.values).map(|d| -d)).collect::<Result<Vec<_>, _>>();
            let auc = at!(S, auc(&at!(S, scores)?, &positive))?;
            cells.push(GridCell { nu, gamma_factor: factor, gamma, auc, converged: model.converged });
        }
    }
    Ok(cells)
}

fn axis_labels(mode: FeatureMode) -> (&'static str, &'static str) {
    match mode {
        FeatureMode::ErrorMetrics => ("L2 error", "SSIM"),
        FeatureMode::PcaTsne => ("t-SNE 1", "t-SNE 2"),
        FeatureMode::RawEncoded => ("code[0]", "code[1]"),
    }
}

/// Scores the test rows, writes `scores.csv`, `scatter.svg` and the report.
pub fn evaluate_stage(
    cfg: &ExperimentConfig,
    manifest: &DatasetManifest,
    features: &[FeatureRow],
    model: &OcSvmModel,
    embed: Option<EmbedStats>,
) -> Result<EvaluationReport, PipelineError> {
    const S: Stage = Stage::Evaluate;
    ensure_out(cfg, S)?;
    let splits = split_of(manifest);
    let test: Vec<FeatureRow> = features.iter().filter(|r| splits.get(r.sample_id.as_str()) == Some(&Split::Test)).cloned().collect();
    if test.is_empty() {
        return Err(PipelineError::new(S, "no test rows in the feature file"));
    }
    let mut scores = Vec::with_capacity(test.len());
    for r in &test {
        let decision = at!(S, model.decision(&r.values))?;
        scores.push(ScoreRow { sample_id: r.sample_id.clone(), label: r.label, decision, score: -decision, prediction: crate::ocsvm::classify(decision) });
    }
    let positive: Vec<bool> = test.iter().map(|r| !r.label.is_ok()).collect();
    let score_values: Vec<f64> = scores.iter().map(|s| s.score).collect();
    let auc_overall = at!(S, auc(&score_values, &positive))?;
    let mut auc_subclass = Vec::new();
    for kind in DefectKind::NOK {
        let idx: Vec<usize> = (0..test.len()).filter(|&i| test[i].label == kind || test[i].label.is_ok()).collect();
        let count = idx.iter().filter(|&&i| test[i].label == kind).count();
        if count == 0 {
            continue;
        }
        let s: Vec<f64> = idx.iter().map(|&i| score_values[i]).collect();
        let p: Vec<bool> = idx.iter().map(|&i| positive[i]).collect();
        auc_subclass.push(SubclassAuc { kind, count, auc: at!(S, auc(&s, &p))? });
    }
    let predictions: Vec<_> = scores.iter().map(|s| s.prediction).collect();
    let dim = model.dim();
    let feature_names = match cfg.feature_mode {
        FeatureMode::ErrorMetrics => vec!["l2".to_string(), "ssim".to_string()],
        _ => (1..=dim).map(|j| format!("f{j}")).collect(),
    };
    let ok_stats = class_stats(test.iter().filter(|r| r.label.is_ok()).map(|r| r.values.as_slice()), dim);
    let nok_stats = class_stats(test.iter().filter(|r| !r.label.is_ok()).map(|r| r.values.as_slice()), dim);

    let fit = fit_matrix(features, manifest);
    let grid = nu_gamma_grid(&fit, &test)?;

    let diag = read_kv(&out_path(cfg, SVM_FIT_FILE)).ok();
    let diag_get = |k: &str| diag.as_ref().and_then(|m| m.get(k).cloned());
    let svm_converged = diag_get("converged").map_or(model.converged, |v| v == "true");
    let svm_residual = diag_get("residual").and_then(|v| v.parse().ok()).unwrap_or(model.residual);
    let svm_iterations = diag_get("iterations").and_then(|v| v.parse().ok()).unwrap_or(model.iterations);

    at!(S, write_scores_csv(&scores, &out_path(cfg, SCORES_FILE)))?;
    let (xl, yl) = axis_labels(cfg.feature_mode);
    at!(S, write_scatter_svg(features, &format!("{} feature space, val + test", cfg.feature_mode), xl, yl, &out_path(cfg, SCATTER_FILE)))?;

    let mut files = vec![("features".to_string(), FEATURES_FILE.to_string())];
    if cfg.feature_mode == FeatureMode::PcaTsne {
        files.push(("codes".into(), CODES_FILE.into()));
    }
    files.extend([
        ("scores".into(), SCORES_FILE.into()),
        ("scatter".into(), SCATTER_FILE.into()),
        ("cae_model".into(), CAE_FILE.into()),
        ("svm_model".into(), OCSVM_FILE.into()),
        ("report_txt".into(), REPORT_TXT_FILE.into()),
        ("report_kv".into(), REPORT_KV_FILE.into()),
    ]);
    let report = EvaluationReport {
        feature_mode: cfg.feature_mode,
        preset: cfg.preset.name().to_string(),
        image_size: cfg.image_size,
        seed: cfg.seed,
        n_fit: fit.len(),
        n_test: test.len(),
        auc_overall,
        auc_subclass,
        confusion: confusion(&predictions, &positive),
        feature_names,
        ok_stats,
        nok_stats,
        tsne_kl: embed.map(|e| e.kl),
        tsne_kl_after_exaggeration: embed.map(|e| e.kl_after_exaggeration),
        svm_converged,
        svm_residual,
        svm_iterations,
        svm_support_vectors: model.alphas.len(),
        svm_nu: cfg.ocsvm.nu,
        svm_gamma: model.gamma,
        svm_rho: model.rho,
        grid,
        files,
    };
    at!(S, fs::write(out_path(cfg, REPORT_TXT_FILE), report.to_text()))?;
    at!(S, fs::write(out_path(cfg, REPORT_KV_FILE), report.to_kv()))?;
    Ok(report)
}

/// Reads the stage inputs of `evaluate` from the output directory.
pub fn evaluate_from_files(cfg: &ExperimentConfig) -> Result<EvaluationReport, PipelineError> {
    const S: Stage = Stage::Evaluate;
    let manifest = load_manifest(cfg, S)?;
    let features = at!(S, read_features_csv(&out_path(cfg, FEATURES_FILE)))?;
    let model = at!(S, load_svm(&out_path(cfg, OCSVM_FILE)))?;
    let embed = if cfg.feature_mode == FeatureMode::PcaTsne {
        let kv = at!(S, read_kv(&out_path(cfg, EMBED_FILE)))?;
        let get = |k: &str| kv.get(k).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| PipelineError::new(S, format!("{EMBED_FILE} lacks {k}")));
        Some(EmbedStats { kl: get("kl")?, kl_after_exaggeration: get("kl_after_exaggeration")? })
    } else {
        None
    };
    evaluate_stage(cfg, &manifest, &features, &model, embed)
}

/// Trains (or loads) the autoencoder and runs every later stage on an
/// existing dataset.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<EvaluationReport, PipelineError> {
    run_experiment_logged(cfg, &mut |_| {})
}

pub fn run_experiment_logged(cfg: &ExperimentConfig, log: Log) -> Result<EvaluationReport, PipelineError> {
    at!(Stage::Config, cfg.validate())?;
    ensure_out(cfg, Stage::Config)?;
    at!(Stage::Config, fs::write(out_path(cfg, CONFIG_FILE), cfg.to_config_string()))?;
    let manifest = load_manifest(cfg, Stage::Train)?;
    let model = train_stage(cfg, &manifest, log)?;
    let rows = features_stage(cfg, &manifest, &model, log)?;
    let (features, embed) = if cfg.feature_mode == FeatureMode::PcaTsne {
        let (f, e) = embed_stage(cfg, &manifest, &rows, log)?;
        (f, Some(e))
    } else {
        (rows, None)
    };
    let svm = fit_svm_stage(cfg, &manifest, &features, log)?;
    evaluate_stage(cfg, &manifest, &features, &svm, embed)
}

/// Synthesizes the dataset and then runs the experiment.
pub fn run_all(cfg: &ExperimentConfig, log: Log) -> Result<EvaluationReport, PipelineError> {
    let manifest = synth_stage(cfg)?;
    log(&format!("synthesized {} samples into {}", manifest.records.len(), cfg.dataset_dir.display()));
    run_experiment_logged(cfg, log)
}
