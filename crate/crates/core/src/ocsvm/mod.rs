//! ν-one-class SVM with an RBF kernel.
//!
//! The dual is
//!
//! ```text
//! minimize   ½ αᵀ K α
//! subject to 0 ≤ α_i ≤ 1 / (ν n),   Σ α_i = 1
//! ```
//!
//! and the decision function is `f(x) = Σ α_i k(x_i, x) − ρ`, positive on the
//! inlier side.

mod io;
mod solver;

pub use io::{decode_model, encode_model, load_model, save_model, OCSV_MAGIC, OCSV_VERSION};
pub use solver::{dual_objective, kernel_matrix, ocsvm_fit, rbf};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OcSvmError {
    #[error("infeasible problem: nu * n = {0} < 1")]
    Infeasible(f64),
    #[error("need at least 2 training rows, got {0}")]
    TooFewRows(usize),
    #[error("data has zero variance; cannot derive gamma")]
    ZeroVariance,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: model has {expected} features, input has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model file: {0}")]
    Format(String),
    #[error("model file truncated in {0}")]
    Truncated(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Kernel width, either fixed or derived from the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    Scale,
    Value(f64),
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gamma::Scale => f.write_str("scale"),
            Gamma::Value(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Gamma {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "scale" {
            return Ok(Gamma::Scale);
        }
        let v: f64 = s.parse().map_err(|_| format!("gamma must be `scale` or a number, got {s:?}"))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(format!("gamma must be positive, got {v}"));
        }
        Ok(Gamma::Value(v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcSvmConfig {
    pub nu: f64,
    pub gamma: Gamma,
    pub kkt_tolerance: f64,
    /// Upper bound on pairwise updates.
    pub max_passes: usize,
    pub seed: u64,
}

impl Default for OcSvmConfig {
    fn default() -> Self {
        Self { nu: 0.05, gamma: Gamma::Scale, kkt_tolerance: 1e-6, max_passes: 1_000_000, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcSvmModel {
    /// `m` support vectors of dimension `k`.
    pub support_vectors: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub rho: f64,
    pub gamma: f64,
    pub n_train: usize,
    pub converged: bool,
    /// Largest KKT violation at exit.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prediction {
    Inlier,
    Outlier,
}

/// `1 / (k * Var(all entries))`, population variance.
pub fn gamma_scale(x: &[Vec<f64>]) -> Result<f64, OcSvmError> {
    if x.len() < 2 {
        return Err(OcSvmError::TooFewRows(x.len()));
    }
    let k = x[0].len();
    let count = (x.len() * k) as f64;
    let mean = x.iter().flatten().sum::<f64>() / count;
    let var = x.iter().flatten().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
    if !(var > 0.0) {
        return Err(OcSvmError::ZeroVariance);
    }
    Ok(1.0 / (k as f64 * var))
}

impl OcSvmModel {
    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64, OcSvmError> {
        if x.len() != self.dim() {
            return Err(OcSvmError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let s: f64 = self.support_vectors.iter().zip(&self.alphas).map(|(sv, &a)| a * rbf(sv, x, self.gamma)).sum();
        Ok(s - self.rho)
    }

    /// Inlier iff the decision value is `>= 0`.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction, OcSvmError> {
        Ok(classify(self.decision(x)?))
    }
}

pub fn classify(decision: f64) -> Prediction {
    if decision >= 0.0 {
        Prediction::Inlier
    } else {
        Prediction::Outlier
    }
}
