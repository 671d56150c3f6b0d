use std::fmt::Debug;

use num_traits::Float;

/// Scalar type the autoencoder engine runs on: `f32` for training, `f64`
/// for gradient verification.
pub trait Real: Float + Default + Debug + Send + Sync + 'static {
    /// `c = alpha * a · b + beta * c` with explicit row/column strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm(m: usize, k: usize, n: usize, alpha: Self, a: &[Self], rsa: isize, csa: isize, b: &[Self], rsb: isize, csb: isize, beta: Self, c: &mut [Self], rsc: isize, csc: isize);

    fn from_f64(v: f64) -> Self;

    fn to_f64(self) -> f64;
}

macro_rules! impl_real {
    ($t:ty, $gemm:path) => {
        impl Real for $t {
            #[inline]
            fn gemm(m: usize, k: usize, n: usize, alpha: Self, a: &[Self], rsa: isize, csa: isize, b: &[Self], rsb: isize, csb: isize, beta: Self, c: &mut [Self], rsc: isize, csc: isize) {
                if m == 0 || n == 0 {
                    return;
                }
                // bounds are checked here once; the kernel itself trusts the strides
                let last = |rows: usize, cols: usize, rs: isize, cs: isize| (rows as isize - 1) * rs + (cols as isize - 1) * cs;
                if k > 0 {
                    assert!(last(m, k, rsa, csa) < a.len() as isize && last(k, n, rsb, csb) < b.len() as isize);
                }
                assert!(last(m, n, rsc, csc) < c.len() as isize);
                unsafe { $gemm(m, k, n, alpha, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), rsc, csc) }
            }

            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);

/// Dense NCHW tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T> {
    shape: [usize; 4],
    data: Vec<T>,
}

impl<T: Real> Tensor4<T> {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Self { shape, data: vec![T::zero(); shape.iter().product()] }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<T>) -> Result<Self, String> {
        let want: usize = shape.iter().product();
        if data.len() != want {
            return Err(format!("buffer of {} elements does not fit shape {shape:?}", data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err("tensor contains non-finite entries".into());
        }
        Ok(Self { shape, data })
    }

    pub(crate) fn from_vec_unchecked(shape: [usize; 4], data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        Self { shape, data }
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Elements per sample (`C * H * W`).
    pub fn sample_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn sample(&self, i: usize) -> &[T] {
        let n = self.sample_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> Tensor4<U> {
        Tensor4 { shape: self.shape, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn cast<U: Real>(&self) -> Tensor4<U> {
        self.map(|v| U::from_f64(v.to_f64()))
    }

    /// Concatenates samples of identical shape along the batch axis.
    pub fn stack(parts: &[&Tensor4<T>]) -> Result<Self, String> {
        let first = parts.first().ok_or("cannot stack zero tensors")?;
        let [_, c, h, w] = first.shape;
        let mut data = Vec::new();
        let mut n = 0;
        for p in parts {
            if p.shape[1..] != [c, h, w] {
                return Err(format!("cannot stack {:?} with {:?}", p.shape, first.shape));
            }
            data.extend_from_slice(&p.data);
            n += p.shape[0];
        }
        Ok(Self { shape: [n, c, h, w], data })
    }

    /// Selects samples by index into a new batch.
    pub fn gather(&self, indices: &[usize]) -> Self {
        let n = self.sample_len();
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            data.extend_from_slice(self.sample(i));
        }
        Self { shape: [indices.len(), self.shape[1], self.shape[2], self.shape[3]], data }
    }
}
