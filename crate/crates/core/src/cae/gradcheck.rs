use super::model::{loss_mse, CaeModel};
use super::tensor::{Real, Tensor4};
use super::CaeError;

/// Default number of weights probed per convolution.
pub const DEFAULT_PROBES_PER_LAYER: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub probed: usize,
    /// Flat index of the worst parameter.
    pub worst_index: usize,
}

/// Reconstruction loss of the model on `batch` (autoencoding target).
pub fn reconstruction_loss(model: &CaeModel<f64>, batch: &Tensor4<f64>) -> Result<f64, CaeError> {
    loss_mse(&model.reconstruct(batch)?, batch)
}

/// Central difference `(L(p + eps) - L(p - eps)) / 2 eps` for one parameter.
pub fn numeric_gradient(model: &CaeModel<f64>, batch: &Tensor4<f64>, index: usize, epsilon: f64) -> Result<f64, CaeError> {
    let mut probe = model.clone();
    let p0 = probe.params()[index];
    probe.params_mut()[index] = p0 + epsilon;
    let plus = reconstruction_loss(&probe, batch)?;
    probe.params_mut()[index] = p0 - epsilon;
    let minus = reconstruction_loss(&probe, batch)?;
    Ok((plus - minus) / (2.0 * epsilon))
}

/// Parameter indices probed: evenly spaced kernel entries plus every bias
/// (capped at `per_layer` each) for every convolution.
pub fn probe_indices<T: Real>(model: &CaeModel<T>, per_layer: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for (w, b) in model.conv_ranges() {
        for range in [w, b] {
            let len = range.len();
            let take = per_layer.min(len);
            out.extend((0..take).map(|i| range.start + i * len / take));
        }
    }
    out
}

/// Compares backprop gradients against central finite differences in double
/// precision. Relative error is `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn gradient_check_probed(model: &CaeModel<f64>, batch: &Tensor4<f64>, epsilon: f64, per_layer: usize) -> Result<GradCheckReport, CaeError> {
    let (_, analytic) = model.loss_and_grad(batch, batch)?;
    let mut report = GradCheckReport { max_relative_error: 0.0, probed: 0, worst_index: 0 };
    for idx in probe_indices(model, per_layer) {
        let numeric = numeric_gradient(model, batch, idx, epsilon)?;
        let a = analytic[idx];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        report.probed += 1;
        if rel > report.max_relative_error {
            report.max_relative_error = rel;
            report.worst_index = idx;
        }
    }
    Ok(report)
}

pub fn gradient_check(model: &CaeModel<f64>, batch: &Tensor4<f64>, epsilon: f64) -> Result<f64, CaeError> {
    Ok(gradient_check_probed(model, batch, epsilon, DEFAULT_PROBES_PER_LAYER)?.max_relative_error)
}
