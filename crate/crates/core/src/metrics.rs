//! Reconstruction-error metrics and the two-dimensional `(L2, SSIM)` feature
//! space built from them.
//!
//! SSIM uses the usual constants (11-tap Gaussian window with sigma 1.5,
//! `k1 = 0.01`, `k2 = 0.03`, dynamic range 1). Local statistics are computed
//! with a separable Gaussian filter over a symmetrically padded image
//! (`... c b a | a b c ... x y z | z y x ...`), so the SSIM map has the same
//! size as the input. Colour images are scored per channel and averaged.

use thiserror::Error;

use crate::cae::{images_to_tensor, tensor_to_image, CaeError, CaeModel};
use crate::image::Image;
use crate::synth::DefectKind;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("image dimensions differ: {0}")]
    DimensionMismatch(String),
    #[error("image {h}x{w} is smaller than the {window}-pixel SSIM window")]
    TooSmall { h: usize, w: usize, window: usize },
    #[error("invalid SSIM parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Model(#[from] CaeError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub window_size: usize,
    pub gaussian_sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self { window_size: 11, gaussian_sigma: 1.5, k1: 0.01, k2: 0.03, dynamic_range: 1.0 }
    }
}

impl SsimParams {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.window_size < 3 || self.window_size % 2 == 0 {
            return Err(MetricsError::Params(format!("window size {} must be odd and >= 3", self.window_size)));
        }
        if !(self.gaussian_sigma > 0.0) || !(self.c1() > 0.0) || !(self.c2() > 0.0) {
            return Err(MetricsError::Params("sigma, C1 and C2 must be positive".into()));
        }
        Ok(())
    }

    /// Normalized 1-D Gaussian taps.
    pub fn kernel(&self) -> Vec<f64> {
        let r = (self.window_size / 2) as f64;
        let taps: Vec<f64> = (0..self.window_size).map(|i| (-(i as f64 - r).powi(2) / (2.0 * self.gaussian_sigma.powi(2))).exp()).collect();
        let sum: f64 = taps.iter().sum();
        taps.into_iter().map(|t| t / sum).collect()
    }
}

/// One sample's position in the error-metric feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorFeaturePoint {
    pub sample_id: String,
    pub l2: f64,
    pub ssim: f64,
    pub label: DefectKind,
}

fn check_same(x: &Image, y: &Image) -> Result<(), MetricsError> {
    if !x.same_shape(y) {
        return Err(MetricsError::DimensionMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            x.height(),
            x.width(),
            x.channels(),
            y.height(),
            y.width(),
            y.channels()
        )));
    }
    Ok(())
}

/// Mean squared difference over all pixels and channels.
pub fn l2_error(x: &Image, xhat: &Image) -> Result<f64, MetricsError> {
    check_same(x, xhat)?;
    let sum: f64 = x.pixels().iter().zip(xhat.pixels()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / x.pixels().len() as f64)
}

/// Symmetric ("half-sample") reflection of an out-of-range index.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Separable Gaussian filtering of one plane with symmetric padding.
fn blur(plane: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let mut tmp = vec![0.0; h * w];
    for row in 0..h {
        let src = &plane[row * w..(row + 1) * w];
        for col in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                acc += t * src[reflect(col as isize + k as isize - r, w)];
            }
            tmp[row * w + col] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for row in 0..h {
        for col in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                acc += t * tmp[reflect(row as isize + k as isize - r, h) * w + col];
            }
            out[row * w + col] = acc;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsimResult {
    pub mean: f64,
    /// Per-pixel SSIM averaged over channels, row-major `height x width`.
    pub map: Vec<f64>,
    pub height: usize,
    pub width: usize,
}

pub fn ssim(x: &Image, y: &Image, params: &SsimParams) -> Result<SsimResult, MetricsError> {
    params.validate()?;
    check_same(x, y)?;
    let (h, w, ch) = (x.height(), x.width(), x.channels());
    if h < params.window_size || w < params.window_size {
        return Err(MetricsError::TooSmall { h, w, window: params.window_size });
    }
    let taps = params.kernel();
    let (c1, c2) = (params.c1(), params.c2());
    let mut map = vec![0.0; h * w];
    for c in 0..ch {
        let plane = |img: &Image| -> Vec<f64> { img.pixels().iter().skip(c).step_by(ch).copied().collect() };
        let (px, py) = (plane(x), plane(y));
        let mu_x = blur(&px, h, w, &taps);
        let mu_y = blur(&py, h, w, &taps);
        let sq = |v: &[f64]| v.iter().map(|a| a * a).collect::<Vec<_>>();
        let e_xx = blur(&sq(&px), h, w, &taps);
        let e_yy = blur(&sq(&py), h, w, &taps);
        let xy: Vec<f64> = px.iter().zip(&py).map(|(a, b)| a * b).collect();
        let e_xy = blur(&xy, h, w, &taps);
        for i in 0..h * w {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = e_xx[i] - mx * mx;
            let var_y = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            let num = (2.0 * (mx * my) + c1) * (2.0 * cov + c2);
            let den = (mx * mx + my * my + c1) * (var_x + var_y + c2);
            map[i] += (num / den).clamp(-1.0, 1.0);
        }
    }
    if ch > 1 {
        map.iter_mut().for_each(|v| *v /= ch as f64);
    }
    let mean = map.iter().sum::<f64>() / map.len() as f64;
    Ok(SsimResult { mean, map, height: h, width: w })
}

/// A labeled input sample.
#[derive(Debug, Clone)]
pub struct LabeledImage {
    pub sample_id: String,
    pub label: DefectKind,
    pub image: Image,
}

/// Features of one sample given its reconstruction.
pub fn error_feature(sample_id: &str, label: DefectKind, x: &Image, xhat: &Image, params: &SsimParams) -> Result<ErrorFeaturePoint, MetricsError> {
    Ok(ErrorFeaturePoint { sample_id: sample_id.to_string(), l2: l2_error(x, xhat)?, ssim: ssim(x, xhat, params)?.mean, label })
}

/// Reconstructs every sample with the model and maps it to `(L2, SSIM)`.
/// Output order follows input order.
pub fn build_error_features(model: &CaeModel<f32>, samples: &[LabeledImage], params: &SsimParams, batch_size: usize) -> Result<Vec<ErrorFeaturePoint>, MetricsError> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(batch_size.max(1)) {
        let images: Vec<&Image> = chunk.iter().map(|s| &s.image).collect();
        let batch = images_to_tensor::<f32>(&images)?;
        let recon = model.reconstruct(&batch)?;
        for (i, s) in chunk.iter().enumerate() {
            let xhat = tensor_to_image(&recon, i);
            // compare against the f32-quantized input the model actually saw
            let x = tensor_to_image(&batch, i);
            out.push(error_feature(&s.sample_id, s.label, &x, &xhat, params)?);
        }
    }
    Ok(out)
}
