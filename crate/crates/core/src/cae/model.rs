use std::ops::Range;

use rand_distr::{Distribution, StandardNormal};

use super::layers::{self, ConvSpec, LayerSpec};
use super::preset::{Architecture, CaePreset};
use super::tensor::{Real, Tensor4};
use super::CaeError;
use crate::image::Image;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
struct ParamSlot {
    spec: ConvSpec,
    weight: Range<usize>,
    bias: Range<usize>,
}

/// Autoencoder weights for a fixed [`Architecture`], stored as one flat
/// parameter vector (per conv: `out x in x k x k` kernel, then bias).
#[derive(Debug, Clone, PartialEq)]
pub struct CaeModel<T: Real = f32> {
    arch: Architecture,
    params: Vec<T>,
    slots: Vec<ParamSlot>,
}

/// Activations recorded during a forward pass, consumed by backprop.
pub struct ForwardTrace<T> {
    activations: Vec<Tensor4<T>>,
    argmax: Vec<Option<Vec<usize>>>,
}

impl<T: Real> ForwardTrace<T> {
    pub fn reconstruction(&self) -> &Tensor4<T> {
        self.activations.last().expect("trace always holds the input")
    }

    /// The input followed by the output of every layer.
    pub fn activations(&self) -> &[Tensor4<T>] {
        &self.activations
    }
}

pub fn init_model(preset: CaePreset, input_size: usize, seed: u64) -> Result<CaeModel<f32>, CaeError> {
    Ok(CaeModel::init(preset.architecture(input_size)?, seed))
}

fn slots_for(arch: &Architecture) -> Vec<ParamSlot> {
    let mut offset = 0;
    arch.conv_specs()
        .map(|&spec| {
            let weight = offset..offset + spec.weight_len();
            let bias = weight.end..weight.end + spec.out_channels;
            offset = bias.end;
            ParamSlot { spec, weight, bias }
        })
        .collect()
}

impl<T: Real> CaeModel<T> {
    /// He-normal kernels (variance `2 / fan_in`) for convs feeding a ReLU,
    /// variance `1 / fan_in` otherwise; zero biases.
    pub fn init(arch: Architecture, seed: u64) -> Self {
        let slots = slots_for(&arch);
        let mut params = vec![T::zero(); arch.param_count()];
        let mut rng = rng_from_seed(seed);
        let layers: Vec<&LayerSpec> = arch.layers().collect();
        let mut slot = 0;
        for (i, layer) in layers.iter().enumerate() {
            if let LayerSpec::Conv(spec) = layer {
                let gain = if matches!(layers.get(i + 1), Some(LayerSpec::Relu)) { 2.0 } else { 1.0 };
                let std = (gain / spec.fan_in() as f64).sqrt();
                for p in &mut params[slots[slot].weight.clone()] {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *p = T::from_f64(std * z);
                }
                slot += 1;
            }
        }
        Self { arch, params, slots }
    }

    pub fn from_params(arch: Architecture, params: Vec<T>) -> Result<Self, CaeError> {
        if params.len() != arch.param_count() {
            return Err(CaeError::Architecture(format!("{} expects {} parameters, got {}", arch.name, arch.param_count(), params.len())));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(CaeError::Architecture("non-finite weight".into()));
        }
        let slots = slots_for(&arch);
        Ok(Self { arch, params, slots })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn input_size(&self) -> usize {
        self.arch.input_size
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    /// `(weights, bias)` of the `i`-th convolution.
    pub fn conv_params(&self, i: usize) -> (&[T], &[T]) {
        let s = &self.slots[i];
        (&self.params[s.weight.clone()], &self.params[s.bias.clone()])
    }

    /// Flat-parameter ranges `(weights, bias)` of each convolution.
    pub fn conv_ranges(&self) -> Vec<(Range<usize>, Range<usize>)> {
        self.slots.iter().map(|s| (s.weight.clone(), s.bias.clone())).collect()
    }

    pub fn cast<U: Real>(&self) -> CaeModel<U> {
        CaeModel { arch: self.arch.clone(), params: self.params.iter().map(|&p| U::from_f64(p.to_f64())).collect(), slots: self.slots.clone() }
    }

    fn check_batch(&self, batch: &Tensor4<T>) -> Result<(), CaeError> {
        let s = self.arch.input_size;
        let [_, c, h, w] = batch.shape();
        if (c, h, w) != (self.arch.in_channels, s, s) {
            return Err(CaeError::Shape(format!("model {} expects Nx{}x{s}x{s}, got {:?}", self.arch.name, self.arch.in_channels, batch.shape())));
        }
        Ok(())
    }

    /// Forward pass keeping every intermediate activation.
    pub fn forward_trace(&self, batch: &Tensor4<T>) -> Result<ForwardTrace<T>, CaeError> {
        self.check_batch(batch)?;
        let mut activations = vec![batch.clone()];
        let mut argmax = Vec::new();
        let mut slot = 0;
        for layer in self.arch.layers() {
            let x = activations.last().unwrap();
            let (y, arg) = match layer {
                LayerSpec::Conv(spec) => {
                    let (w, b) = self.conv_params(slot);
                    slot += 1;
                    (layers::conv_forward(x, spec, w, b), None)
                }
                LayerSpec::Relu => (layers::relu_forward(x), None),
                LayerSpec::Sigmoid => (layers::sigmoid_forward(x), None),
                LayerSpec::MaxPool2 => {
                    let (y, a) = layers::maxpool_forward(x);
                    (y, Some(a))
                }
                LayerSpec::Upsample2 => (layers::upsample_forward(x), None),
            };
            activations.push(y);
            argmax.push(arg);
        }
        Ok(ForwardTrace { activations, argmax })
    }

    /// Returns `(code, reconstruction)`.
    pub fn forward(&self, batch: &Tensor4<T>) -> Result<(Tensor4<T>, Tensor4<T>), CaeError> {
        let mut trace = self.forward_trace(batch)?;
        let recon = trace.activations.pop().unwrap();
        let code = trace.activations.swap_remove(self.arch.encoder.len());
        Ok((code, recon))
    }

    pub fn encode(&self, batch: &Tensor4<T>) -> Result<Tensor4<T>, CaeError> {
        self.check_batch(batch)?;
        let mut x = batch.clone();
        let mut slot = 0;
        for layer in &self.arch.encoder {
            x = self.apply(layer, &x, &mut slot);
        }
        Ok(x)
    }

    pub fn reconstruct(&self, batch: &Tensor4<T>) -> Result<Tensor4<T>, CaeError> {
        self.check_batch(batch)?;
        let mut x = batch.clone();
        let mut slot = 0;
        for layer in self.arch.layers() {
            x = self.apply(layer, &x, &mut slot);
        }
        Ok(x)
    }

    fn apply(&self, layer: &LayerSpec, x: &Tensor4<T>, slot: &mut usize) -> Tensor4<T> {
        match layer {
            LayerSpec::Conv(spec) => {
                let (w, b) = self.conv_params(*slot);
                *slot += 1;
                layers::conv_forward(x, spec, w, b)
            }
            LayerSpec::Relu => layers::relu_forward(x),
            LayerSpec::Sigmoid => layers::sigmoid_forward(x),
            LayerSpec::MaxPool2 => layers::maxpool_forward(x).0,
            LayerSpec::Upsample2 => layers::upsample_forward(x),
        }
    }

    /// Backpropagates `d_output` (gradient w.r.t. the reconstruction) and
    /// returns the gradient w.r.t. the flat parameter vector.
    pub fn backward(&self, trace: &ForwardTrace<T>, d_output: &Tensor4<T>) -> Vec<T> {
        let mut grads = vec![T::zero(); self.params.len()];
        let layers: Vec<&LayerSpec> = self.arch.layers().collect();
        let mut slot = self.slots.len();
        let mut grad = d_output.clone();
        for (i, layer) in layers.iter().enumerate().rev() {
            let x = &trace.activations[i];
            grad = match layer {
                LayerSpec::Conv(spec) => {
                    slot -= 1;
                    let s = &self.slots[slot];
                    let (gw, gb) = grads[s.weight.start..s.bias.end].split_at_mut(s.weight.len());
                    match layers::conv_backward(x, &grad, spec, &self.params[s.weight.clone()], gw, gb, i > 0) {
                        Some(dx) => dx,
                        None => break,
                    }
                }
                LayerSpec::Relu => layers::relu_backward(x, &grad),
                LayerSpec::Sigmoid => layers::sigmoid_backward(&trace.activations[i + 1], &grad),
                LayerSpec::MaxPool2 => layers::maxpool_backward(x.shape(), trace.argmax[i].as_ref().unwrap(), &grad),
                LayerSpec::Upsample2 => layers::upsample_backward(&grad),
            };
        }
        grads
    }

    /// Mean-squared reconstruction loss of `input` against `target` and its
    /// parameter gradient.
    pub fn loss_and_grad(&self, input: &Tensor4<T>, target: &Tensor4<T>) -> Result<(f64, Vec<T>), CaeError> {
        let trace = self.forward_trace(input)?;
        let recon = trace.reconstruction();
        let loss = loss_mse(recon, target)?;
        let scale = T::from_f64(2.0 / recon.data().len() as f64);
        let d = recon.data().iter().zip(target.data()).map(|(&r, &t)| (r - t) * scale).collect();
        let d = Tensor4::from_vec_unchecked(recon.shape(), d);
        Ok((loss, self.backward(&trace, &d)))
    }
}

/// Mean over all elements of the squared difference, accumulated in `f64`.
pub fn loss_mse<T: Real>(reconstruction: &Tensor4<T>, target: &Tensor4<T>) -> Result<f64, CaeError> {
    if reconstruction.shape() != target.shape() {
        return Err(CaeError::Shape(format!("loss between {:?} and {:?}", reconstruction.shape(), target.shape())));
    }
    let n = reconstruction.data().len();
    let sum: f64 = reconstruction.data().iter().zip(target.data()).map(|(&r, &t)| (r.to_f64() - t.to_f64()).powi(2)).sum();
    Ok(sum / n as f64)
}

/// Packs images (HWC) into an NCHW batch.
pub fn images_to_tensor<T: Real>(images: &[&Image]) -> Result<Tensor4<T>, CaeError> {
    let first = images.first().ok_or_else(|| CaeError::Shape("empty image batch".into()))?;
    let (h, w, c) = (first.height(), first.width(), first.channels());
    let mut data = Vec::with_capacity(images.len() * h * w * c);
    for img in images {
        if (img.height(), img.width(), img.channels()) != (h, w, c) {
            return Err(CaeError::Shape("images in a batch must share dimensions".into()));
        }
        for ch in 0..c {
            for r in 0..h {
                for col in 0..w {
                    data.push(T::from_f64(img.get(r, col, ch)));
                }
            }
        }
    }
    Ok(Tensor4::from_vec_unchecked([images.len(), c, h, w], data))
}

/// Unpacks sample `i` of an NCHW batch into an image, clamping to `[0,1]`.
pub fn tensor_to_image<T: Real>(t: &Tensor4<T>, i: usize) -> Image {
    let [_, c, h, w] = t.shape();
    let s = t.sample(i);
    Image::from_fn(h, w, c, |r, col, ch| s[(ch * h + r) * w + col].to_f64())
}
