//! PCA followed by exact t-SNE: the baseline reduction of encoder codes to a
//! two-dimensional feature space.

mod pca;
mod tsne;

pub use pca::{pca_fit, standardize_columns, PcaModel};
pub use tsne::{calibrate_sigma, joint_probabilities, kl_divergence, tsne_embed, Calibration, Embedding, TsneConfig, PERPLEXITY_TOLERANCE};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DimRedError {
    #[error("target dimension {k} out of range (n = {n}, d = {d})")]
    DimensionOutOfRange { k: usize, n: usize, d: usize },
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("data has zero covariance (all rows identical)")]
    Degenerate,
    #[error("covariance rank is below the requested dimension {0}")]
    RankDeficient(usize),
    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("perplexity {target} unreachable: {reason}")]
    UnreachablePerplexity { target: f64, reason: String },
    #[error("perplexity {perplexity} must be below (n - 1) / 3 = {limit}")]
    PerplexityTooLarge { perplexity: f64, limit: f64 },
    #[error("invalid t-SNE configuration: {0}")]
    Config(String),
    #[error("t-SNE diverged at iteration {0}")]
    Overflow(usize),
}
