//! Experiment orchestration: stages, evaluation, persistence and plots.
//!
//! A run goes `synth → train → features → [embed] → fit-svm → evaluate`.
//! Every stage reads and writes plain files under the output directory, so
//! the CLI can run stages one at a time; [`run_experiment`] chains them in
//! memory and writes the same files.

mod config;
mod eval;
mod files;
mod report;
mod run;
mod svg;

pub use config::{ConfigError, ExperimentConfig, CONFIG_KEYS};
pub use eval::{auc, class_stats, confusion, ClassStats, Confusion, EvalError};
pub use files::{features_csv_string, read_features_csv, read_scores_csv, write_features_csv, write_scores_csv, FeatureRow, ScoreRow};
pub use report::{read_kv, EvaluationReport, SubclassAuc};
pub use run::{
    embed_stage, evaluate_from_files, evaluate_stage, features_stage, fit_svm_stage, load_manifest, load_split_images, nu_gamma_grid, run_all, run_experiment,
    run_experiment_logged, synth_stage, train_stage, EmbedStats, GridCell, Stage, CAE_FILE, CODES_FILE, CONFIG_FILE, EMBED_FILE, FEATURES_FILE, HISTORY_FILE,
    OCSVM_FILE, REPORT_KV_FILE, REPORT_TXT_FILE, SCATTER_FILE, SCORES_FILE, SVM_FIT_FILE,
};
pub use svg::{scatter_svg, write_scatter_svg, PALETTE};

use std::error::Error as StdError;
use std::fmt;
use std::str::FromStr;

/// Which feature space feeds the one-class SVM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureMode {
    /// `(L2, SSIM)` of each reconstruction.
    ErrorMetrics,
    /// Encoder codes through PCA and then t-SNE.
    PcaTsne,
    /// Flattened encoder codes as-is.
    RawEncoded,
}

impl FeatureMode {
    pub const ALL: [FeatureMode; 3] = [FeatureMode::ErrorMetrics, FeatureMode::PcaTsne, FeatureMode::RawEncoded];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::ErrorMetrics => "error_metrics",
            FeatureMode::PcaTsne => "pca_tsne",
            FeatureMode::RawEncoded => "raw_encoded",
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown feature mode {s:?} (expected error_metrics, pca_tsne or raw_encoded)"))
    }
}

/// Error from one pipeline stage, carrying the stage name.
#[derive(Debug)]
pub struct PipelineError {
    pub stage: Stage,
    pub source: Box<dyn StdError + Send + Sync>,
}

impl PipelineError {
    pub fn new(stage: Stage, source: impl Into<Box<dyn StdError + Send + Sync>>) -> Self {
        Self { stage, source: source.into() }
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage: {}", self.stage, self.source)
    }
}

impl StdError for PipelineError {
    fn source(&self) -> Option<&(dyn StdError + 'static)> {
        Some(self.source.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_names_round_trip() {
        for m in FeatureMode::ALL {
            assert_eq!(m.as_str().parse::<FeatureMode>().unwrap(), m);
        }
        assert!("tsne".parse::<FeatureMode>().is_err());
    }

    #[test]
    fn error_names_stage() {
        let e = PipelineError::new(Stage::FitSvm, "boom");
        assert_eq!(e.to_string(), "fit-svm stage: boom");
    }
}
