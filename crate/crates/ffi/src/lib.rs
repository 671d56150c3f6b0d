//! C ABI over `cae-anomaly`.
//!
//! Objects are opaque handles created by `*_load` / `*_fit` / `*_from_*`
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`CaeStatus`]; on failure [`cae_last_error`] describes the cause.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use cae_anomaly::cae::{self, images_to_tensor, CaeError, CaeModel};
use cae_anomaly::image::{self, Image, ImageError};
use cae_anomaly::metrics::{error_feature, l2_error, ssim, MetricsError, SsimParams};
use cae_anomaly::ocsvm::{self, Gamma, OcSvmConfig, OcSvmError, OcSvmModel, Prediction};
use cae_anomaly::pipeline::{auc, EvalError};
use cae_anomaly::synth::DefectKind;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    DimensionMismatch = 5,
    Numeric = 6,
    Panic = 7,
}

/// Opaque image handle.
pub struct CaeImage(Image);

/// Opaque autoencoder handle.
pub struct CaeAutoencoder(CaeModel<f32>);

/// Opaque one-class SVM handle.
pub struct CaeOcSvm(OcSvmModel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(CaeStatus, String);

impl Failure {
    fn new(status: CaeStatus, msg: impl Into<String>) -> Self {
        Failure(status, msg.into())
    }
}

impl From<ImageError> for Failure {
    fn from(e: ImageError) -> Self {
        let status = match e {
            ImageError::Io { .. } => CaeStatus::Io,
            ImageError::Invalid(_) => CaeStatus::InvalidArgument,
            _ => CaeStatus::Format,
        };
        Failure(status, e.to_string())
    }
}

impl From<CaeError> for Failure {
    fn from(e: CaeError) -> Self {
        let status = match e {
            CaeError::Io(_) => CaeStatus::Io,
            CaeError::Format(_) | CaeError::Truncated(_) => CaeStatus::Format,
            CaeError::Shape(_) => CaeStatus::DimensionMismatch,
            CaeError::Diverged { .. } => CaeStatus::Numeric,
            _ => CaeStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Model(inner) => inner.into(),
            MetricsError::DimensionMismatch(_) => Failure(CaeStatus::DimensionMismatch, e.to_string()),
            _ => Failure(CaeStatus::InvalidArgument, e.to_string()),
        }
    }
}

impl From<OcSvmError> for Failure {
    fn from(e: OcSvmError) -> Self {
        let status = match e {
            OcSvmError::Io(_) => CaeStatus::Io,
            OcSvmError::Format(_) | OcSvmError::Truncated(_) => CaeStatus::Format,
            OcSvmError::DimensionMismatch { .. } => CaeStatus::DimensionMismatch,
            OcSvmError::ZeroVariance => CaeStatus::Numeric,
            _ => CaeStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        Failure(CaeStatus::InvalidArgument, e.to_string())
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CaeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CaeStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CaeStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::new(CaeStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::new(CaeStatus::NullPointer, format!("{what} is null")))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::new(CaeStatus::NullPointer, "path is null"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| Failure::new(CaeStatus::InvalidArgument, "path is not UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::new(CaeStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cae_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cae_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a binary PGM (P5) or PPM (P6) file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cae_image_load(path: *const c_char, out: *mut *mut CaeImage) -> CaeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        *out = boxed(CaeImage(image::load_image(path_arg(path)?)?));
        Ok(())
    })
}

/// Builds an image from `height * width * channels` row-major,
/// channel-interleaved intensities in `[0, 1]`.
///
/// # Safety
/// `pixels` must point to that many doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cae_image_from_pixels(height: usize, width: usize, channels: usize, pixels: *const f64, out: *mut *mut CaeImage) -> CaeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let len = height.checked_mul(width).and_then(|v| v.checked_mul(channels)).ok_or_else(|| Failure::new(CaeStatus::InvalidArgument, "size overflow"))?;
        let px = slice_arg(pixels, len, "pixels")?;
        *out = boxed(CaeImage(Image::new(height, width, channels, px.to_vec())?));
        Ok(())
    })
}

/// Writes the image as P5 or P6.
///
/// # Safety
/// `img` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cae_image_save(img: *const CaeImage, path: *const c_char) -> CaeStatus {
    guard(|| {
        let img = as_ref(img, "image")?;
        image::save_image(&img.0, path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `img` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn cae_image_dims(img: *const CaeImage, height: *mut usize, width: *mut usize, channels: *mut usize) -> CaeStatus {
    guard(|| {
        let img = &as_ref(img, "image")?.0;
        *out_ref(height, "height")? = img.height();
        *out_ref(width, "width")? = img.width();
        *out_ref(channels, "channels")? = img.channels();
        Ok(())
    })
}

/// Copies the pixel buffer into `out`, which must hold exactly
/// `height * width * channels` doubles.
///
/// # Safety
/// `img` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cae_image_pixels(img: *const CaeImage, out: *mut f64, len: usize) -> CaeStatus {
    guard(|| {
        let px = as_ref(img, "image")?.0.pixels();
        if len != px.len() {
            return Err(Failure::new(CaeStatus::DimensionMismatch, format!("buffer holds {len} values, image has {}", px.len())));
        }
        if out.is_null() {
            return Err(Failure::new(CaeStatus::NullPointer, "out is null"));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(px);
        Ok(())
    })
}

/// # Safety
/// `img` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cae_image_free(img: *mut CaeImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Mean squared pixel difference.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cae_l2_error(a: *const CaeImage, b: *const CaeImage, out: *mut f64) -> CaeStatus {
    guard(|| {
        *out_ref(out, "out")? = l2_error(&as_ref(a, "a")?.0, &as_ref(b, "b")?.0)?;
        Ok(())
    })
}

/// Mean SSIM with an 11-tap Gaussian window (sigma 1.5).
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cae_ssim(a: *const CaeImage, b: *const CaeImage, out: *mut f64) -> CaeStatus {
    guard(|| {
        *out_ref(out, "out")? = ssim(&as_ref(a, "a")?.0, &as_ref(b, "b")?.0, &SsimParams::default())?.mean;
        Ok(())
    })
}

/// Loads a `CAEM` autoencoder file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cae_model_load(path: *const c_char, out: *mut *mut CaeAutoencoder) -> CaeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        *out = boxed(CaeAutoencoder(cae::load_model(&path_arg(path)?)?));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `size` and `code_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cae_model_shape(model: *const CaeAutoencoder, size: *mut usize, code_len: *mut usize) -> CaeStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.0;
        *out_ref(size, "size")? = m.input_size();
        *out_ref(code_len, "code_len")? = m.architecture().code_len();
        Ok(())
    })
}

/// Reconstructs `img` and returns its `(L2, SSIM)` error features.
///
/// # Safety
/// Handles must be live; `l2` and `ssim_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cae_model_error_features(model: *const CaeAutoencoder, img: *const CaeImage, l2: *mut f64, ssim_out: *mut f64) -> CaeStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.0;
        let batch = images_to_tensor::<f32>(&[&as_ref(img, "image")?.0])?;
        let recon = m.reconstruct(&batch)?;
        let x = cae::tensor_to_image(&batch, 0);
        let xhat = cae::tensor_to_image(&recon, 0);
        let p = error_feature("", DefectKind::Ok, &x, &xhat, &SsimParams::default())?;
        *out_ref(l2, "l2")? = p.l2;
        *out_ref(ssim_out, "ssim")? = p.ssim;
        Ok(())
    })
}

/// Writes the flattened encoder code of `img` into `out` (`len` must equal
/// the model's code length).
///
/// # Safety
/// Handles must be live; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cae_model_encode(model: *const CaeAutoencoder, img: *const CaeImage, out: *mut f64, len: usize) -> CaeStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.0;
        let code = m.encode(&images_to_tensor::<f32>(&[&as_ref(img, "image")?.0])?)?;
        let v = code.sample(0);
        if len != v.len() {
            return Err(Failure::new(CaeStatus::DimensionMismatch, format!("buffer holds {len} values, code has {}", v.len())));
        }
        if out.is_null() {
            return Err(Failure::new(CaeStatus::NullPointer, "out is null"));
        }
        for (o, &c) in std::slice::from_raw_parts_mut(out, len).iter_mut().zip(v) {
            *o = c as f64;
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cae_model_free(model: *mut CaeAutoencoder) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Fits a ν-one-class SVM on `n` row-major rows of dimension `k`.
/// `gamma <= 0` selects `1 / (k * Var(x))`. The solver runs to a KKT
/// tolerance of 1e-6.
///
/// # Safety
/// `x` must point to `n * k` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cae_ocsvm_fit(x: *const f64, n: usize, k: usize, nu: f64, gamma: f64, out: *mut *mut CaeOcSvm) -> CaeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        if k == 0 {
            return Err(Failure::new(CaeStatus::InvalidArgument, "k must be positive"));
        }
        let len = n.checked_mul(k).ok_or_else(|| Failure::new(CaeStatus::InvalidArgument, "size overflow"))?;
        let data = slice_arg(x, len, "x")?;
        let rows: Vec<Vec<f64>> = data.chunks(k).map(<[f64]>::to_vec).collect();
        let gamma = if gamma > 0.0 { Gamma::Value(gamma) } else { Gamma::Scale };
        let cfg = OcSvmConfig { nu, gamma, ..OcSvmConfig::default() };
        *out = boxed(CaeOcSvm(ocsvm::ocsvm_fit(&rows, &cfg)?));
        Ok(())
    })
}

/// Loads an `OCSV` model file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cae_ocsvm_load(path: *const c_char, out: *mut *mut CaeOcSvm) -> CaeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        *out = boxed(CaeOcSvm(ocsvm::load_model(&path_arg(path)?)?));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cae_ocsvm_save(model: *const CaeOcSvm, path: *const c_char) -> CaeStatus {
    guard(|| {
        ocsvm::save_model(&as_ref(model, "model")?.0, &path_arg(path)?)?;
        Ok(())
    })
}

/// Feature dimension, support-vector count and convergence flag.
///
/// # Safety
/// `model` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn cae_ocsvm_info(model: *const CaeOcSvm, dim: *mut usize, support_vectors: *mut usize, converged: *mut bool) -> CaeStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.0;
        *out_ref(dim, "dim")? = m.dim();
        *out_ref(support_vectors, "support_vectors")? = m.alphas.len();
        *out_ref(converged, "converged")? = m.converged;
        Ok(())
    })
}

/// Signed decision value, positive on the inlier side.
///
/// # Safety
/// `model` must be a live handle; `x` must point to `k` doubles.
#[no_mangle]
pub unsafe extern "C" fn cae_ocsvm_decision(model: *const CaeOcSvm, x: *const f64, k: usize, out: *mut f64) -> CaeStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.0;
        *out_ref(out, "out")? = m.decision(slice_arg(x, k, "x")?)?;
        Ok(())
    })
}

/// Sets `*inlier` to true iff the decision value is `>= 0`.
///
/// # Safety
/// `model` must be a live handle; `x` must point to `k` doubles.
#[no_mangle]
pub unsafe extern "C" fn cae_ocsvm_predict(model: *const CaeOcSvm, x: *const f64, k: usize, inlier: *mut bool) -> CaeStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.0;
        *out_ref(inlier, "inlier")? = m.predict(slice_arg(x, k, "x")?)? == Prediction::Inlier;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cae_ocsvm_free(model: *mut CaeOcSvm) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Mann–Whitney AUC of `scores` against `labels` (nonzero = positive).
///
/// # Safety
/// `scores` and `labels` must point to `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cae_auc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> CaeStatus {
    guard(|| {
        let s = slice_arg(scores, n, "scores")?;
        let l: Vec<bool> = slice_arg(labels, n, "labels")?.iter().map(|&b| b != 0).collect();
        *out_ref(out, "out")? = auc(s, &l)?;
        Ok(())
    })
}
