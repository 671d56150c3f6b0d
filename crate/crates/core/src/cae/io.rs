//! `CAEM` model file.
//!
//! ```text
//! "CAEM"            4 bytes magic
//! version           u16
//! name              u16 length + UTF-8 bytes
//! input_size        u32
//! in_channels       u32
//! encoder layers    u32
//! decoder layers    u32
//! per layer         u8 kind (0 conv, 1 relu, 2 sigmoid, 3 maxpool2, 4 upsample2)
//!   conv only       u32 in, u32 out, u32 kernel, u32 stride, u32 padding,
//!                   out*in*k*k f32 kernel weights, out f32 biases
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use super::layers::{ConvSpec, LayerSpec};
use super::model::CaeModel;
use super::preset::Architecture;
use super::CaeError;
use crate::binio::{ByteReader, ByteWriter};

pub const CAEM_MAGIC: &[u8; 4] = b"CAEM";
pub const CAEM_VERSION: u16 = 1;

pub fn encode_model(model: &CaeModel<f32>) -> Vec<u8> {
    let arch = model.architecture();
    let mut w = ByteWriter::new();
    w.bytes(CAEM_MAGIC);
    w.u16(CAEM_VERSION);
    w.u16(arch.name.len() as u16);
    w.bytes(arch.name.as_bytes());
    w.u32(arch.input_size as u32);
    w.u32(arch.in_channels as u32);
    w.u32(arch.encoder.len() as u32);
    w.u32(arch.decoder.len() as u32);
    let mut conv = 0;
    for layer in arch.layers() {
        match layer {
            LayerSpec::Conv(s) => {
                w.u8(0);
                for v in [s.in_channels, s.out_channels, s.kernel, s.stride, s.padding] {
                    w.u32(v as u32);
                }
                let (weights, bias) = model.conv_params(conv);
                weights.iter().chain(bias).for_each(|&v| w.f32(v));
                conv += 1;
            }
            LayerSpec::Relu => w.u8(1),
            LayerSpec::Sigmoid => w.u8(2),
            LayerSpec::MaxPool2 => w.u8(3),
            LayerSpec::Upsample2 => w.u8(4),
        }
    }
    w.buf
}

pub fn decode_model(bytes: &[u8]) -> Result<CaeModel<f32>, CaeError> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(4, "magic").map_err(CaeError::Truncated)?;
    if magic != CAEM_MAGIC {
        return Err(CaeError::Format(format!("bad magic {magic:?}, expected CAEM")));
    }
    let version = r.u16("version").map_err(CaeError::Truncated)?;
    if version != CAEM_VERSION {
        return Err(CaeError::Format(format!("unsupported version {version}")));
    }
    let t = CaeError::Truncated;
    let name_len = r.u16("preset name").map_err(t)? as usize;
    let name = String::from_utf8(r.take(name_len, "preset name").map_err(t)?.to_vec()).map_err(|_| CaeError::Format("preset name is not UTF-8".into()))?;
    let input_size = r.u32("header").map_err(t)? as usize;
    let in_channels = r.u32("header").map_err(t)? as usize;
    let n_enc = r.u32("header").map_err(t)? as usize;
    let n_dec = r.u32("header").map_err(t)? as usize;
    let mut layers = Vec::new();
    let mut params = Vec::new();
    for i in 0..n_enc + n_dec {
        let section = format!("layer {i}");
        let layer = match r.u8(&section).map_err(t)? {
            0 => {
                let mut dims = [0usize; 5];
                for d in &mut dims {
                    *d = r.u32(&section).map_err(t)? as usize;
                }
                let spec = ConvSpec { in_channels: dims[0], out_channels: dims[1], kernel: dims[2], stride: dims[3], padding: dims[4] };
                let count = spec.weight_len() + spec.out_channels;
                let raw = r.take(count * 4, &format!("layer {i} weights")).map_err(t)?;
                params.extend(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())));
                LayerSpec::Conv(spec)
            }
            1 => LayerSpec::Relu,
            2 => LayerSpec::Sigmoid,
            3 => LayerSpec::MaxPool2,
            4 => LayerSpec::Upsample2,
            k => return Err(CaeError::Format(format!("unknown layer kind {k} at layer {i}"))),
        };
        layers.push(layer);
    }
    if !r.is_empty() {
        return Err(CaeError::Format("trailing bytes after last layer".into()));
    }
    let decoder = layers.split_off(n_enc);
    let arch = Architecture::new(&name, input_size, in_channels, layers, decoder)?;
    CaeModel::from_params(arch, params)
}

pub fn save_model(model: &CaeModel<f32>, path: &Path) -> Result<(), CaeError> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<CaeModel<f32>, CaeError> {
    decode_model(&fs::read(path)?)
}
