//! `OCSV` model file.
//!
//! ```text
//! "OCSV"            4 bytes magic
//! version           u16
//! n_train           u64
//! gamma             f64
//! rho               f64
//! m                 u64 support vectors
//! k                 u32 feature dimension
//! per vector        k f64 coordinates, then f64 alpha
//! ```
//! Little-endian throughout. Solver diagnostics are not stored; a decoded
//! model reports `converged = true`, zero residual and zero iterations.

use std::fs;
use std::path::Path;

use super::{OcSvmError, OcSvmModel};
use crate::binio::{ByteReader, ByteWriter};

pub const OCSV_MAGIC: &[u8; 4] = b"OCSV";
pub const OCSV_VERSION: u16 = 1;

pub fn encode_model(model: &OcSvmModel) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(OCSV_MAGIC);
    w.u16(OCSV_VERSION);
    w.u64(model.n_train as u64);
    w.f64(model.gamma);
    w.f64(model.rho);
    w.u64(model.support_vectors.len() as u64);
    w.u32(model.dim() as u32);
    for (sv, &a) in model.support_vectors.iter().zip(&model.alphas) {
        for &v in sv {
            w.f64(v);
        }
        w.f64(a);
    }
    w.buf
}

pub fn decode_model(bytes: &[u8]) -> Result<OcSvmModel, OcSvmError> {
    let t = OcSvmError::Truncated;
    let mut r = ByteReader::new(bytes);
    if r.take(4, "magic").map_err(t)? != OCSV_MAGIC {
        return Err(OcSvmError::Format("bad magic".into()));
    }
    let version = r.u16("version").map_err(t)?;
    if version != OCSV_VERSION {
        return Err(OcSvmError::Format(format!("unsupported version {version}")));
    }
    let n_train = r.u64("header").map_err(t)? as usize;
    let gamma = r.f64("header").map_err(t)?;
    let rho = r.f64("header").map_err(t)?;
    let m = r.u64("header").map_err(t)? as usize;
    let k = r.u32("header").map_err(t)? as usize;
    if !(gamma > 0.0 && gamma.is_finite()) || !rho.is_finite() {
        return Err(OcSvmError::Format("gamma and rho must be finite, gamma positive".into()));
    }
    if m == 0 || k == 0 {
        return Err(OcSvmError::Format("model has no support vectors".into()));
    }
    // guard the allocation against absurd headers
    if bytes.len() / 8 < m.saturating_mul(k + 1) {
        return Err(OcSvmError::Truncated("support vectors".into()));
    }
    let mut support_vectors = Vec::with_capacity(m);
    let mut alphas = Vec::with_capacity(m);
    for _ in 0..m {
        let mut sv = Vec::with_capacity(k);
        for _ in 0..k {
            sv.push(r.f64("support vectors").map_err(t)?);
        }
        support_vectors.push(sv);
        alphas.push(r.f64("support vectors").map_err(t)?);
    }
    if !r.is_empty() {
        return Err(OcSvmError::Format("trailing bytes after support vectors".into()));
    }
    Ok(OcSvmModel { support_vectors, alphas, rho, gamma, n_train, converged: true, residual: 0.0, iterations: 0 })
}

pub fn save_model(model: &OcSvmModel, path: &Path) -> Result<(), OcSvmError> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<OcSvmModel, OcSvmError> {
    decode_model(&fs::read(path)?)
}
