//! Layer kernels: forward and backward for convolution, ReLU, sigmoid,
//! 2x2 max-pooling and 2x nearest-neighbour upsampling.

use super::tensor::{Real, Tensor4};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvSpec {
    /// Odd kernel with "same" padding (`kernel / 2`).
    pub fn same(in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        Self { in_channels, out_channels, kernel, stride, padding: kernel / 2 }
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn output_hw(&self, h: usize, w: usize) -> (usize, usize) {
        let out = |x: usize| (x + 2 * self.padding - self.kernel) / self.stride + 1;
        (out(h), out(w))
    }

    pub(crate) fn check(&self) -> Result<(), String> {
        if self.kernel % 2 == 0 || self.kernel == 0 {
            return Err(format!("conv kernel size {} must be odd", self.kernel));
        }
        if !(1..=2).contains(&self.stride) {
            return Err(format!("conv stride {} must be 1 or 2", self.stride));
        }
        if self.stride == 1 && self.padding != self.kernel / 2 {
            return Err("stride-1 conv must use same padding".into());
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err("conv channel counts must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv(ConvSpec),
    Relu,
    Sigmoid,
    MaxPool2,
    Upsample2,
}

impl LayerSpec {
    /// Output `(channels, height, width)` for an input of the given shape.
    pub fn output_shape(&self, c: usize, h: usize, w: usize) -> Result<(usize, usize, usize), String> {
        match self {
            LayerSpec::Conv(s) => {
                s.check()?;
                if c != s.in_channels {
                    return Err(format!("conv expects {} channels, got {c}", s.in_channels));
                }
                if h + 2 * s.padding < s.kernel || w + 2 * s.padding < s.kernel {
                    return Err(format!("input {h}x{w} too small for kernel {}", s.kernel));
                }
                let (oh, ow) = s.output_hw(h, w);
                Ok((s.out_channels, oh, ow))
            }
            LayerSpec::Relu | LayerSpec::Sigmoid => Ok((c, h, w)),
            LayerSpec::MaxPool2 => {
                if h % 2 != 0 || w % 2 != 0 {
                    return Err(format!("max-pool needs even spatial size, got {h}x{w}"));
                }
                Ok((c, h / 2, w / 2))
            }
            LayerSpec::Upsample2 => Ok((c, h * 2, w * 2)),
        }
    }
}

/// Unfolds one sample (`C x H x W`) into a `(C*k*k) x (OH*OW)` column matrix.
fn im2col<T: Real>(x: &[T], spec: &ConvSpec, h: usize, w: usize, oh: usize, ow: usize, cols: &mut [T]) {
    let k = spec.kernel;
    let p = oh * ow;
    let pad = spec.padding as isize;
    for c in 0..spec.in_channels {
        let plane = &x[c * h * w..(c + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..oh {
                    let iy = (oy * spec.stride + ky) as isize - pad;
                    let out_row = &mut dst[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= h as isize {
                        out_row.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, o) in out_row.iter_mut().enumerate() {
                        let ix = (ox * spec.stride + kx) as isize - pad;
                        *o = if ix < 0 || ix >= w as isize { T::zero() } else { src[ix as usize] };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the input grid.
fn col2im<T: Real>(cols: &[T], spec: &ConvSpec, h: usize, w: usize, oh: usize, ow: usize, dx: &mut [T]) {
    let k = spec.kernel;
    let p = oh * ow;
    let pad = spec.padding as isize;
    for c in 0..spec.in_channels {
        let plane = &mut dx[c * h * w..(c + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..oh {
                    let iy = (oy * spec.stride + ky) as isize - pad;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    for ox in 0..ow {
                        let ix = (ox * spec.stride + kx) as isize - pad;
                        if ix >= 0 && ix < w as isize {
                            dst[ix as usize] = dst[ix as usize] + src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv_forward<T: Real>(x: &Tensor4<T>, spec: &ConvSpec, weight: &[T], bias: &[T]) -> Tensor4<T> {
    let [n, _, h, w] = x.shape();
    let (oh, ow) = spec.output_hw(h, w);
    let p = oh * ow;
    let kk = spec.fan_in();
    let co = spec.out_channels;
    let mut out = Tensor4::zeros([n, co, oh, ow]);
    let mut cols = vec![T::zero(); kk * p];
    for i in 0..n {
        im2col(x.sample(i), spec, h, w, oh, ow, &mut cols);
        let y = &mut out.data_mut()[i * co * p..(i + 1) * co * p];
        for (o, chunk) in y.chunks_mut(p).enumerate() {
            chunk.fill(bias[o]);
        }
        T::gemm(co, kk, p, T::one(), weight, kk as isize, 1, &cols, p as isize, 1, T::one(), y, p as isize, 1);
    }
    out
}

/// Accumulates weight/bias gradients and returns the input gradient.
pub(crate) fn conv_backward<T: Real>(x: &Tensor4<T>, dy: &Tensor4<T>, spec: &ConvSpec, weight: &[T], dweight: &mut [T], dbias: &mut [T], need_dx: bool) -> Option<Tensor4<T>> {
    let [n, ci, h, w] = x.shape();
    let [_, co, oh, ow] = dy.shape();
    let p = oh * ow;
    let kk = spec.fan_in();
    let mut cols = vec![T::zero(); kk * p];
    let mut dcols = vec![T::zero(); kk * p];
    let mut dx = if need_dx { Some(Tensor4::zeros([n, ci, h, w])) } else { None };
    for i in 0..n {
        let g = dy.sample(i);
        for (o, chunk) in g.chunks(p).enumerate() {
            dbias[o] = chunk.iter().fold(dbias[o], |acc, &v| acc + v);
        }
        im2col(x.sample(i), spec, h, w, oh, ow, &mut cols);
        // dW (co x kk) += dY (co x p) * cols^T (p x kk)
        T::gemm(co, p, kk, T::one(), g, p as isize, 1, &cols, 1, p as isize, T::one(), dweight, kk as isize, 1);
        if let Some(dx) = dx.as_mut() {
            // dcols (kk x p) = W^T (kk x co) * dY (co x p)
            T::gemm(kk, co, p, T::one(), weight, 1, kk as isize, g, p as isize, 1, T::zero(), &mut dcols, p as isize, 1);
            let len = ci * h * w;
            col2im(&dcols, spec, h, w, oh, ow, &mut dx.data_mut()[i * len..(i + 1) * len]);
        }
    }
    dx
}

pub(crate) fn relu_forward<T: Real>(x: &Tensor4<T>) -> Tensor4<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub(crate) fn relu_backward<T: Real>(x: &Tensor4<T>, dy: &Tensor4<T>) -> Tensor4<T> {
    let data = x.data().iter().zip(dy.data()).map(|(&v, &g)| if v > T::zero() { g } else { T::zero() }).collect();
    Tensor4::from_vec_unchecked(x.shape(), data)
}

#[inline]
fn sigmoid<T: Real>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn sigmoid_forward<T: Real>(x: &Tensor4<T>) -> Tensor4<T> {
    x.map(sigmoid)
}

/// Uses the forward output `y`: `dx = dy * y * (1 - y)`.
pub(crate) fn sigmoid_backward<T: Real>(y: &Tensor4<T>, dy: &Tensor4<T>) -> Tensor4<T> {
    let data = y.data().iter().zip(dy.data()).map(|(&s, &g)| g * s * (T::one() - s)).collect();
    Tensor4::from_vec_unchecked(y.shape(), data)
}

/// 2x2/stride-2 max-pool. Returns the output and, per output element, the
/// flat input index it was taken from. Ties go to the first element in
/// row-major scan order.
pub(crate) fn maxpool_forward<T: Real>(x: &Tensor4<T>) -> (Tensor4<T>, Vec<usize>) {
    let [n, c, h, w] = x.shape();
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    let data = x.data();
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + 2 * oy * w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                    if data[idx] > data[best] {
                        best = idx;
                    }
                }
                out.push(data[best]);
                argmax.push(best);
            }
        }
    }
    (Tensor4::from_vec_unchecked([n, c, oh, ow], out), argmax)
}

pub(crate) fn maxpool_backward<T: Real>(input_shape: [usize; 4], argmax: &[usize], dy: &Tensor4<T>) -> Tensor4<T> {
    let mut dx = Tensor4::zeros(input_shape);
    let d = dx.data_mut();
    for (&idx, &g) in argmax.iter().zip(dy.data()) {
        d[idx] = d[idx] + g;
    }
    dx
}

pub(crate) fn upsample_forward<T: Real>(x: &Tensor4<T>) -> Tensor4<T> {
    let [n, c, h, w] = x.shape();
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = Vec::with_capacity(n * c * oh * ow);
    for plane in x.data().chunks(h * w) {
        for oy in 0..oh {
            let row = &plane[(oy / 2) * w..(oy / 2 + 1) * w];
            for ox in 0..ow {
                out.push(row[ox / 2]);
            }
        }
    }
    Tensor4::from_vec_unchecked([n, c, oh, ow], out)
}

pub(crate) fn upsample_backward<T: Real>(dy: &Tensor4<T>) -> Tensor4<T> {
    let [n, c, oh, ow] = dy.shape();
    let (h, w) = (oh / 2, ow / 2);
    let mut dx = Tensor4::zeros([n, c, h, w]);
    let d = dx.data_mut();
    for (plane, g) in dy.data().chunks(oh * ow).enumerate() {
        for oy in 0..oh {
            for ox in 0..ow {
                let idx = plane * h * w + (oy / 2) * w + ox / 2;
                d[idx] = d[idx] + g[oy * ow + ox];
            }
        }
    }
    dx
}
