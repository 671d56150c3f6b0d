//! The three compared autoencoder topologies.
//!
//! | preset | convs | code at 256x256 | code at 64x64 |
//! |--------|-------|-----------------|---------------|
//! | BAE1   | 3 + 3 | 8 x 32 x 32     | 8 x 8 x 8     |
//! | BAE2   | 2 + 2 | 8 x 64 x 64     | 8 x 16 x 16   |
//! | MVTEC  | 8 + 8 | 128 x 1 x 1     | 128 x 1 x 1   |
//!
//! MVTEC downsamples with stride-2 convolutions until the spatial size reaches
//! 1x1 (at most eight times); any remaining encoder convs run at stride 1. The
//! decoder mirrors the encoder, upsampling wherever the encoder strided.

use std::fmt;
use std::str::FromStr;

use super::layers::{ConvSpec, LayerSpec};
use super::CaeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaePreset {
    Bae1,
    Bae2,
    Mvtec,
}

impl CaePreset {
    pub const ALL: [CaePreset; 3] = [CaePreset::Bae1, CaePreset::Bae2, CaePreset::Mvtec];

    pub fn name(self) -> &'static str {
        match self {
            CaePreset::Bae1 => "BAE1",
            CaePreset::Bae2 => "BAE2",
            CaePreset::Mvtec => "MVTEC",
        }
    }

    pub fn architecture(self, input_size: usize) -> Result<Architecture, CaeError> {
        let (encoder, decoder) = match self {
            CaePreset::Bae1 => pooled_stack(&[16, 8, 8]),
            CaePreset::Bae2 => pooled_stack(&[16, 8]),
            CaePreset::Mvtec => mvtec_stack(input_size),
        };
        Architecture::new(self.name(), input_size, 3, encoder, decoder)
    }
}

impl fmt::Display for CaePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaePreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bae1" => Ok(CaePreset::Bae1),
            "bae2" => Ok(CaePreset::Bae2),
            "mvtec" => Ok(CaePreset::Mvtec),
            _ => Err(format!("unknown preset {s:?} (expected bae1, bae2 or mvtec)")),
        }
    }
}

/// conv3x3 + relu + maxpool per stage, mirrored with upsample + conv3x3.
fn pooled_stack(channels: &[usize]) -> (Vec<LayerSpec>, Vec<LayerSpec>) {
    let mut encoder = Vec::new();
    let mut prev = 3;
    for &c in channels {
        encoder.extend([LayerSpec::Conv(ConvSpec::same(prev, c, 3, 1)), LayerSpec::Relu, LayerSpec::MaxPool2]);
        prev = c;
    }
    let mut decoder = Vec::new();
    let ins: Vec<usize> = channels.iter().rev().copied().collect();
    let outs: Vec<usize> = ins.iter().skip(1).copied().chain(std::iter::once(3)).collect();
    for (i, (&ci, &co)) in ins.iter().zip(&outs).enumerate() {
        decoder.push(LayerSpec::Upsample2);
        decoder.push(LayerSpec::Conv(ConvSpec::same(ci, co, 3, 1)));
        decoder.push(if i + 1 == ins.len() { LayerSpec::Sigmoid } else { LayerSpec::Relu });
    }
    (encoder, decoder)
}

const MVTEC_CHANNELS: [usize; 8] = [32, 32, 32, 64, 64, 128, 64, 128];
const MVTEC_KERNELS: [usize; 8] = [5, 5, 5, 5, 3, 3, 3, 3];

fn mvtec_stack(input_size: usize) -> (Vec<LayerSpec>, Vec<LayerSpec>) {
    let mut strided = 0;
    let mut s = input_size;
    while s > 1 && s % 2 == 0 && strided < MVTEC_CHANNELS.len() {
        s /= 2;
        strided += 1;
    }
    let mut encoder = Vec::new();
    let mut convs = Vec::new();
    let mut prev = 3;
    for (i, (&c, &k)) in MVTEC_CHANNELS.iter().zip(&MVTEC_KERNELS).enumerate() {
        let spec = ConvSpec::same(prev, c, k, if i < strided { 2 } else { 1 });
        convs.push(spec);
        encoder.push(LayerSpec::Conv(spec));
        // the code layer stays linear
        if i + 1 < MVTEC_CHANNELS.len() {
            encoder.push(LayerSpec::Relu);
        }
        prev = c;
    }
    let mut decoder = Vec::new();
    for (i, spec) in convs.iter().enumerate().rev() {
        if spec.stride == 2 {
            decoder.push(LayerSpec::Upsample2);
        }
        decoder.push(LayerSpec::Conv(ConvSpec::same(spec.out_channels, spec.in_channels, spec.kernel, 1)));
        decoder.push(if i == 0 { LayerSpec::Sigmoid } else { LayerSpec::Relu });
    }
    (encoder, decoder)
}

/// A validated encoder/decoder layer stack for a fixed square input size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub name: String,
    pub input_size: usize,
    pub in_channels: usize,
    pub encoder: Vec<LayerSpec>,
    pub decoder: Vec<LayerSpec>,
}

impl Architecture {
    pub fn new(name: &str, input_size: usize, in_channels: usize, encoder: Vec<LayerSpec>, decoder: Vec<LayerSpec>) -> Result<Self, CaeError> {
        let arch = Self { name: name.to_string(), input_size, in_channels, encoder, decoder };
        let (c, h, w) = arch.output_shape()?;
        if (c, h, w) != (in_channels, input_size, input_size) {
            return Err(CaeError::Architecture(format!(
                "{name}: decoder produces {c}x{h}x{w}, expected {in_channels}x{input_size}x{input_size}"
            )));
        }
        Ok(arch)
    }

    pub fn layers(&self) -> impl Iterator<Item = &LayerSpec> {
        self.encoder.iter().chain(&self.decoder)
    }

    pub fn conv_specs(&self) -> impl Iterator<Item = &ConvSpec> {
        self.layers().filter_map(|l| match l {
            LayerSpec::Conv(s) => Some(s),
            _ => None,
        })
    }

    pub fn conv_count(&self) -> usize {
        self.conv_specs().count()
    }

    pub fn param_count(&self) -> usize {
        self.conv_specs().map(|s| s.weight_len() + s.out_channels).sum()
    }

    fn propagate<'a>(&self, layers: impl Iterator<Item = &'a LayerSpec>, mut shape: (usize, usize, usize)) -> Result<(usize, usize, usize), CaeError> {
        for (i, layer) in layers.enumerate() {
            shape = layer.output_shape(shape.0, shape.1, shape.2).map_err(|e| CaeError::Architecture(format!("{} layer {i}: {e}", self.name)))?;
        }
        Ok(shape)
    }

    /// `(channels, height, width)` of the encoder output.
    pub fn code_shape(&self) -> Result<(usize, usize, usize), CaeError> {
        self.propagate(self.encoder.iter(), (self.in_channels, self.input_size, self.input_size))
    }

    pub fn output_shape(&self) -> Result<(usize, usize, usize), CaeError> {
        self.propagate(self.layers(), (self.in_channels, self.input_size, self.input_size))
    }

    pub fn code_len(&self) -> usize {
        let (c, h, w) = self.code_shape().expect("validated architecture");
        c * h * w
    }
}
