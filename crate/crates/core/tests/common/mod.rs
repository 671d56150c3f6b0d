//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Box–Muller standard normal, kept separate from the crate's sampler.
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn gaussian_rows(n: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    (0..n).map(|_| (0..k).map(|_| normal(&mut r)).collect()).collect()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major
/// `n × n`). Returns eigenvalues and eigenvectors (as columns of `v`).
pub fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * n + j].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

/// Euclidean projection onto `{0 ≤ α ≤ c, Σα = 1}` by bisection on the shift.
pub fn project_box_simplex(v: &[f64], c: f64) -> Vec<f64> {
    let total = |tau: f64| v.iter().map(|&x| (x - tau).clamp(0.0, c)).sum::<f64>();
    let (mut lo, mut hi) = (v.iter().cloned().fold(f64::INFINITY, f64::min) - c - 1.0, v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    v.iter().map(|&x| (x - tau).clamp(0.0, c)).collect()
}

/// Accelerated projected gradient on `½ αᵀKα` over the box simplex.
pub fn projected_gradient_dual(k: &[f64], n: usize, c: f64, iterations: usize) -> Vec<f64> {
    // Gershgorin bound on the largest eigenvalue
    let lipschitz = (0..n).map(|i| (0..n).map(|j| k[i * n + j].abs()).sum::<f64>()).fold(0.0, f64::max);
    let step = 1.0 / lipschitz;
    let mut x = project_box_simplex(&vec![1.0 / n as f64; n], c);
    let mut y = x.clone();
    let mut t = 1.0f64;
    for _ in 0..iterations {
        let grad: Vec<f64> = (0..n).map(|i| (0..n).map(|j| k[i * n + j] * y[j]).sum()).collect();
        let z: Vec<f64> = y.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
        let x_next = project_box_simplex(&z, c);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = x_next.iter().zip(&x).map(|(a, b)| a + (t - 1.0) / t_next * (a - b)).collect();
        x = x_next;
        t = t_next;
    }
    x
}

pub fn quad_objective(k: &[f64], a: &[f64]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[i] * k[i * n + j] * a[j];
        }
    }
    0.5 * s
}

pub fn rbf_matrix(x: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let d: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            k[i * n + j] = (-gamma * d).exp();
        }
    }
    k
}

/// Mean silhouette coefficient with Euclidean distances.
pub fn silhouette(points: &[[f64; 2]], labels: &[usize]) -> f64 {
    let n = points.len();
    let dist = |a: &[f64; 2], b: &[f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let clusters: Vec<usize> = {
        let mut c = labels.to_vec();
        c.sort_unstable();
        c.dedup();
        c
    };
    let mut total = 0.0;
    for i in 0..n {
        let mean_to = |c: usize| {
            let members: Vec<usize> = (0..n).filter(|&j| labels[j] == c && j != i).collect();
            members.iter().map(|&j| dist(&points[i], &points[j])).sum::<f64>() / members.len().max(1) as f64
        };
        let a = mean_to(labels[i]);
        let b = clusters.iter().filter(|&&c| c != labels[i]).map(|&c| mean_to(c)).fold(f64::INFINITY, f64::min);
        total += if a.max(b) > 0.0 { (b - a) / a.max(b) } else { 0.0 };
    }
    total / n as f64
}

/// AUC by enumerating every positive/negative pair.
pub fn pair_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if positive[i] && !positive[j] {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Three well-separated 5-D Gaussian blobs of 20 points each.
pub fn three_clusters(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut r = rng(seed);
    let centres = [[0.0; 5], [10.0, 0.0, 0.0, 0.0, 0.0], [0.0, 10.0, 0.0, 0.0, 0.0]];
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, centre) in centres.iter().enumerate() {
        for _ in 0..20 {
            rows.push(centre.iter().map(|m| m + normal(&mut r)).collect());
            labels.push(c);
        }
    }
    (rows, labels)
}

/// Moves a model to a generic, well-scaled point for finite differencing:
/// random positive biases (no pre-activation sits exactly on a ReLU kink)
/// and each convolution rescaled so its output has unit spread on `batch`.
/// Without the rescaling, deep presets at tiny resolutions shrink the
/// signal by orders of magnitude and early-layer gradients drown in
/// rounding noise.
pub fn well_scaled(mut model: cae_anomaly::cae::CaeModel<f64>, batch: &cae_anomaly::cae::Tensor4<f64>, seed: u64) -> cae_anomaly::cae::CaeModel<f64> {
    use cae_anomaly::cae::LayerSpec;
    let mut r = rng(seed);
    let ranges = model.conv_ranges();
    for (_, b) in &ranges {
        for i in b.clone() {
            model.params_mut()[i] = 0.05 + 0.1 * r.random::<f64>();
        }
    }
    let conv_layers: Vec<usize> = model.architecture().layers().enumerate().filter(|(_, l)| matches!(l, LayerSpec::Conv(_))).map(|(i, _)| i).collect();
    for (k, &layer) in conv_layers.iter().enumerate() {
        let trace = model.forward_trace(batch).expect("batch fits the model");
        let out = trace.activations()[layer + 1].data();
        let mean = out.iter().sum::<f64>() / out.len() as f64;
        let sd = (out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / out.len() as f64).sqrt();
        let (w, b) = ranges[k].clone();
        for i in w.chain(b) {
            model.params_mut()[i] /= sd;
        }
    }
    model
}
