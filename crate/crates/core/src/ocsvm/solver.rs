//! Pairwise coordinate descent (SMO-style) on the one-class dual.
//!
//! Moving mass `t` from `α_j` to `α_i` keeps `Σα = 1` and changes the
//! objective by `t (G_i − G_j) + ½ t² η` with `G = Kα` and
//! `η = K_ii + K_jj − 2 K_ij`. Each step takes the maximal violating pair
//! `i = argmin {G_i : α_i < C}`, `j = argmax {G_j : α_j > 0}` and the
//! clipped Newton step `t = min((G_j − G_i) / η, C − α_i, α_j)`.

use super::{gamma_scale, Gamma, OcSvmConfig, OcSvmError, OcSvmModel};

#[inline]
pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d).exp()
}

/// Dense RBF Gram matrix, row-major.
pub fn kernel_matrix(x: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in i + 1..n {
            let v = rbf(&x[i], &x[j], gamma);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

/// `½ αᵀ K α` for a row-major kernel matrix.
pub fn dual_objective(alphas: &[f64], kernel: &[f64]) -> f64 {
    let n = alphas.len();
    let mut s = 0.0;
    for i in 0..n {
        if alphas[i] == 0.0 {
            continue;
        }
        let row = &kernel[i * n..(i + 1) * n];
        s += alphas[i] * row.iter().zip(alphas).map(|(k, a)| k * a).sum::<f64>();
    }
    0.5 * s
}

/// Solves the dual and returns the full coefficient vector together with the
/// fitted model.
pub(crate) fn solve(x: &[Vec<f64>], config: &OcSvmConfig) -> Result<(Vec<f64>, OcSvmModel), OcSvmError> {
    let n = x.len();
    if n < 2 {
        return Err(OcSvmError::TooFewRows(n));
    }
    let k_dim = x[0].len();
    if k_dim == 0 || x.iter().any(|r| r.len() != k_dim) {
        return Err(OcSvmError::Config("rows must share a positive dimension".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(OcSvmError::Config("feature rows contain non-finite values".into()));
    }
    if !(config.nu > 0.0 && config.nu <= 1.0) {
        return Err(OcSvmError::Config(format!("nu must lie in (0,1], got {}", config.nu)));
    }
    if !(config.kkt_tolerance > 0.0) {
        return Err(OcSvmError::Config("kkt_tolerance must be positive".into()));
    }
    let nu_n = config.nu * n as f64;
    if nu_n < 1.0 - 1e-12 {
        return Err(OcSvmError::Infeasible(nu_n));
    }
    let gamma = match config.gamma {
        Gamma::Scale => gamma_scale(x)?,
        Gamma::Value(g) if g > 0.0 && g.is_finite() => g,
        Gamma::Value(g) => return Err(OcSvmError::Config(format!("gamma must be positive, got {g}"))),
    };
    let c = 1.0 / nu_n;
    let kernel = kernel_matrix(x, gamma);

    // uniform start on the first ceil(nu n) points
    let m0 = ((nu_n - 1e-9).ceil() as usize).clamp(1, n);
    let mut alpha = vec![0.0; n];
    alpha[..m0].fill(1.0 / m0 as f64);
    let mut grad = vec![0.0; n];
    for i in 0..m0 {
        let row = &kernel[i * n..(i + 1) * n];
        for (g, k) in grad.iter_mut().zip(row) {
            *g += alpha[i] * k;
        }
    }

    let mut iterations = 0;
    let mut residual;
    loop {
        let mut i_up = usize::MAX;
        let mut g_up = f64::INFINITY;
        let mut j_down = usize::MAX;
        let mut g_down = f64::NEG_INFINITY;
        for t in 0..n {
            if alpha[t] < c && grad[t] < g_up {
                g_up = grad[t];
                i_up = t;
            }
            if alpha[t] > 0.0 && grad[t] > g_down {
                g_down = grad[t];
                j_down = t;
            }
        }
        residual = if i_up == usize::MAX || j_down == usize::MAX { 0.0 } else { (g_down - g_up).max(0.0) };
        if residual <= config.kkt_tolerance || iterations >= config.max_passes {
            break;
        }
        let (i, j) = (i_up, j_down);
        let eta = (kernel[i * n + i] + kernel[j * n + j] - 2.0 * kernel[i * n + j]).max(1e-12);
        let room_i = c - alpha[i];
        let room_j = alpha[j];
        let step = (residual / eta).min(room_i).min(room_j);
        alpha[i] = if step == room_i { c } else { alpha[i] + step };
        alpha[j] = if step == room_j { 0.0 } else { alpha[j] - step };
        let (ri, rj) = (&kernel[i * n..(i + 1) * n], &kernel[j * n..(j + 1) * n]);
        for t in 0..n {
            grad[t] += step * (ri[t] - rj[t]);
        }
        iterations += 1;
    }

    let free: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0 && alpha[t] < c).collect();
    let rho = if !free.is_empty() {
        free.iter().map(|&t| grad[t]).sum::<f64>() / free.len() as f64
    } else {
        let lower = (0..n).filter(|&t| alpha[t] >= c).map(|t| grad[t]).fold(f64::NEG_INFINITY, f64::max);
        let upper = (0..n).filter(|&t| alpha[t] == 0.0).map(|t| grad[t]).fold(f64::INFINITY, f64::min);
        match (lower.is_finite(), upper.is_finite()) {
            (true, true) => 0.5 * (lower + upper),
            (true, false) => lower,
            (false, true) => upper,
            (false, false) => 0.0,
        }
    };

    let support: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    let model = OcSvmModel {
        support_vectors: support.iter().map(|&t| x[t].clone()).collect(),
        alphas: support.iter().map(|&t| alpha[t]).collect(),
        rho,
        gamma,
        n_train: n,
        converged: residual <= config.kkt_tolerance,
        residual,
        iterations,
    };
    Ok((alpha, model))
}

/// Fits the one-class SVM. Non-convergence within `max_passes` is reported
/// through `converged` / `residual`, not as an error.
pub fn ocsvm_fit(x: &[Vec<f64>], config: &OcSvmConfig) -> Result<OcSvmModel, OcSvmError> {
    Ok(solve(x, config)?.1)
}

impl OcSvmModel {
    /// `½ αᵀ K α` over the support vectors.
    pub fn dual_objective(&self) -> f64 {
        dual_objective(&self.alphas, &kernel_matrix(&self.support_vectors, self.gamma))
    }
}
