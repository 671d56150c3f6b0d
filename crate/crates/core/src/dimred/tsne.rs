//! Exact (O(n^2)) t-SNE.
//!
//! Bandwidths are calibrated per row by bisection on `ln(beta)` where
//! `beta = 1 / (2 sigma^2)`: distances are shifted by their minimum and scaled
//! by their spread, and the search runs over `ln(beta') in [-30, 700]` for at
//! most 100 halvings, stopping once `|2^H - perplexity| <= 1e-9`.
//!
//! Optimization follows the common reference schedule: early exaggeration 12
//! with momentum 0.5 for the first 250 iterations, then momentum 0.8, learning
//! rate 200 and per-coordinate adaptive gains (+0.2 on sign change, x0.8
//! otherwise, floor 0.01).

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use super::DimRedError;
use crate::rng::{derive_seed, rng_from_seed};

pub const PERPLEXITY_TOLERANCE: f64 = 1e-9;
const BISECTION_STEPS: usize = 100;
const LOG_BETA_BRACKET: (f64, f64) = (-30.0, 700.0);
const MIN_GAIN: f64 = 0.01;
const DUPLICATE_JITTER: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub learning_rate: f64,
    pub momentum_early: f64,
    pub momentum_late: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            learning_rate: 200.0,
            momentum_early: 0.5,
            momentum_late: 0.8,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// One 2-D coordinate per input row.
    pub points: Vec<[f64; 2]>,
    /// KL(P || Q) after the last iteration.
    pub kl_divergence: f64,
    /// KL(P || Q) (unexaggerated P) right after early exaggeration ends.
    pub kl_after_exaggeration: f64,
}

/// Result of calibrating one row's bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub sigma: f64,
    pub probabilities: Vec<f64>,
    /// `2^H` of the calibrated distribution.
    pub perplexity: f64,
}

/// Conditional distribution `p_j ∝ exp(-beta' x_j)` and its perplexity.
fn conditional(x: &[f64], beta: f64) -> (Vec<f64>, f64) {
    let w: Vec<f64> = x.iter().map(|&v| (-beta * v).exp()).collect();
    let z: f64 = w.iter().sum();
    let p: Vec<f64> = w.iter().map(|v| v / z).collect();
    let h: f64 = p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum();
    (p, h.exp())
}

/// Finds the Gaussian bandwidth whose conditional distribution over the given
/// squared distances has the target perplexity.
pub fn calibrate_sigma(sq_distances: &[f64], target_perplexity: f64) -> Result<Calibration, DimRedError> {
    let unreachable = |reason: String| DimRedError::UnreachablePerplexity { target: target_perplexity, reason };
    if sq_distances.is_empty() || sq_distances.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(unreachable("distances must be finite and non-negative".into()));
    }
    let min = sq_distances.iter().copied().fold(f64::INFINITY, f64::min);
    let max = sq_distances.iter().copied().fold(0.0, f64::max);
    let m = sq_distances.len() as f64;
    if max == 0.0 {
        return Err(unreachable("all distances are zero".into()));
    }
    let spread = max - min;
    if spread == 0.0 {
        // every bandwidth gives the uniform distribution
        if (m - target_perplexity).abs() <= PERPLEXITY_TOLERANCE {
            return Ok(Calibration { sigma: min.sqrt(), probabilities: vec![1.0 / m; sq_distances.len()], perplexity: m });
        }
        return Err(unreachable(format!("{} equidistant neighbours fix the perplexity at {m}", sq_distances.len())));
    }
    let ties = sq_distances.iter().filter(|&&d| d == min).count() as f64;
    if target_perplexity > m + PERPLEXITY_TOLERANCE || target_perplexity < ties - PERPLEXITY_TOLERANCE {
        return Err(unreachable(format!("reachable range is [{ties}, {m}]")));
    }
    let x: Vec<f64> = sq_distances.iter().map(|d| (d - min) / spread).collect();
    let (mut lo, mut hi) = LOG_BETA_BRACKET;
    let mut best = conditional(&x, lo.exp());
    let mut best_log_beta = lo;
    for _ in 0..BISECTION_STEPS {
        if (best.1 - target_perplexity).abs() <= PERPLEXITY_TOLERANCE {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let cand = conditional(&x, mid.exp());
        // perplexity decreases as beta grows
        if cand.1 > target_perplexity {
            lo = mid;
        } else {
            hi = mid;
        }
        if (cand.1 - target_perplexity).abs() < (best.1 - target_perplexity).abs() {
            best = cand;
            best_log_beta = mid;
        }
    }
    let beta = best_log_beta.exp() / spread;
    Ok(Calibration { sigma: (1.0 / (2.0 * beta)).sqrt(), probabilities: best.0, perplexity: best.1 })
}

fn squared_distances(x: &DMatrix<f64>) -> Vec<f64> {
    let n = x.nrows();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = x.row(i).iter().zip(x.row(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Symmetrized affinities `p_ij = (p_{j|i} + p_{i|j}) / 2n` (row-major `n x n`,
/// zero diagonal) together with each row's realized perplexity.
pub fn joint_probabilities(x: &DMatrix<f64>, perplexity: f64) -> Result<(Vec<f64>, Vec<f64>), DimRedError> {
    let n = x.nrows();
    let d = squared_distances(x);
    let mut cond = vec![0.0; n * n];
    let mut realized = Vec::with_capacity(n);
    for i in 0..n {
        let row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d[i * n + j]).collect();
        let cal = calibrate_sigma(&row, perplexity)?;
        realized.push(cal.perplexity);
        let mut it = cal.probabilities.into_iter();
        for j in (0..n).filter(|&j| j != i) {
            cond[i * n + j] = it.next().unwrap();
        }
    }
    let mut p = vec![0.0; n * n];
    let denom = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / denom;
        }
    }
    Ok((p, realized))
}

/// Student-t affinities of an embedding: returns `(num, sum)` where
/// `num_ij = 1 / (1 + |y_i - y_j|^2)` (zero diagonal).
fn student_t(y: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = v;
            num[j * n + i] = v;
            sum += 2.0 * v;
        }
    }
    (num, sum)
}

/// KL(P || Q) for the embedding `y`.
pub fn kl_divergence(p: &[f64], y: &[[f64; 2]]) -> f64 {
    let (num, sum) = student_t(y);
    p.iter()
        .zip(&num)
        .filter(|(&pij, _)| pij > 0.0)
        .map(|(&pij, &nij)| pij * (pij / (nij / sum).max(f64::MIN_POSITIVE)).ln())
        .sum()
}

/// Perturbs exact duplicate rows (all but the first copy) by tiny seeded
/// Gaussian jitter so every row keeps a solvable bandwidth search.
fn jitter_duplicates(x: &mut DMatrix<f64>, seed: u64) {
    let n = x.nrows();
    let mut rng = rng_from_seed(derive_seed(seed, 0xD0B1));
    for i in 1..n {
        if (0..i).any(|j| x.row(i) == x.row(j)) {
            for v in x.row_mut(i).iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += DUPLICATE_JITTER * z * v.abs().max(1.0);
            }
        }
    }
}

pub fn tsne_embed(x: &DMatrix<f64>, config: &TsneConfig) -> Result<Embedding, DimRedError> {
    let n = x.nrows();
    if n < 4 {
        return Err(DimRedError::TooFewRows { needed: 4, got: n });
    }
    let limit = (n - 1) as f64 / 3.0;
    if !(config.perplexity > 0.0 && config.perplexity < limit) {
        return Err(DimRedError::PerplexityTooLarge { perplexity: config.perplexity, limit });
    }
    if config.iterations < config.exaggeration_iterations || config.exaggeration_iterations == 0 {
        return Err(DimRedError::Config("iterations must cover the exaggeration phase".into()));
    }
    if !(config.learning_rate > 0.0) {
        return Err(DimRedError::Config("learning_rate must be positive".into()));
    }
    let mut data = x.clone();
    jitter_duplicates(&mut data, config.seed);
    let (p, _) = joint_probabilities(&data, config.perplexity)?;

    let mut rng = rng_from_seed(config.seed);
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            [1e-4 * a, 1e-4 * b]
        })
        .collect();
    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut grad = vec![[0.0; 2]; n];
    let mut kl_after_exaggeration = f64::NAN;

    for it in 0..config.iterations {
        let early = it < config.exaggeration_iterations;
        let exaggeration = if early { config.early_exaggeration } else { 1.0 };
        let momentum = if early { config.momentum_early } else { config.momentum_late };
        let (num, sum) = student_t(&y);
        for i in 0..n {
            let mut g = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let nij = num[i * n + j];
                let mult = (exaggeration * p[i * n + j] - nij / sum) * nij;
                g[0] += mult * (y[i][0] - y[j][0]);
                g[1] += mult * (y[i][1] - y[j][1]);
            }
            grad[i] = [4.0 * g[0], 4.0 * g[1]];
        }
        for i in 0..n {
            for k in 0..2 {
                let gain = &mut gains[i][k];
                *gain = if update[i][k] * grad[i][k] < 0.0 { *gain + 0.2 } else { *gain * 0.8 };
                *gain = gain.max(MIN_GAIN);
                update[i][k] = momentum * update[i][k] - config.learning_rate * *gain * grad[i][k];
                y[i][k] += update[i][k];
            }
        }
        if y.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(DimRedError::Overflow(it + 1));
        }
        if it + 1 == config.exaggeration_iterations {
            kl_after_exaggeration = kl_divergence(&p, &y);
        }
    }
    let kl = kl_divergence(&p, &y);
    if !kl.is_finite() {
        return Err(DimRedError::Overflow(config.iterations));
    }
    Ok(Embedding { points: y, kl_divergence: kl, kl_after_exaggeration })
}
