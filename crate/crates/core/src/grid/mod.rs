//! Dense grid storage and the kernels shared by every other module:
//! average pooling, bicubic resampling, the radix-2 2-D FFT, normalization
//! and the GRD1 raster format.
//!
//! Spatial kernels act on the two trailing axes. Leading axes (batch,
//! channel) are treated as a stack of independent planes.

mod bicubic;
mod fft;
mod io;
mod norm;
mod pool;
mod reduce;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst};

use crate::error::{Error, Result};

pub use bicubic::{bicubic_upsample, nearest_upsample};
pub use fft::{fft2, fft2_complex, ifft2, ifft2_complex, ComplexGrid};
pub use io::{decode_grd1, encode_grd1, read_grd1, write_grd1, GRD1_MAGIC};
pub use norm::{denormalize, normalize, NormStats};
pub use pool::avg_pool;
pub use reduce::{pairwise_sum, sum_f64};

/// Floating point element type. `f32` is the storage type for data and
/// trained models; `f64` instantiations exist for precision-sensitive
/// verification (finite-difference gradient checks, optimizer traces).
pub trait Real:
    Float + FloatConst + Sum + Default + Debug + Display + Send + Sync + 'static
{
    fn of(v: f64) -> Self;
    fn f64(self) -> f64;
}

impl Real for f32 {
    #[inline(always)]
    fn of(v: f64) -> Self {
        v as f32
    }
    #[inline(always)]
    fn f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline(always)]
    fn of(v: f64) -> Self {
        v
    }
    #[inline(always)]
    fn f64(self) -> f64 {
        self
    }
}

/// Row-major dense array. The canonical layout is batch × channel × height ×
/// width; rank-2 tensors stand for a single field.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

/// 32-bit gridded field, the type every public pipeline stage exchanges.
pub type GridTensor = Tensor<f32>;

impl<T: Real> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        check_shape(&shape)?;
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} holds {n} elements but {} were supplied",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    /// # Panics
    /// If any dimension is zero.
    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, T::zero())
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        assert!(
            !shape.is_empty() && shape.iter().all(|&d| d >= 1),
            "tensor dimensions must be >= 1, got {shape:?}"
        );
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    /// Single `h × w` field built from `f(row, col)`.
    pub fn from_fn(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(h * w);
        for r in 0..h {
            for c in 0..w {
                data.push(f(r, c));
            }
        }
        Self::new(vec![h, w], data).expect("from_fn shape")
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
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

    /// Trailing two axes as `(height, width)`.
    pub fn hw(&self) -> (usize, usize) {
        let r = self.shape.len();
        if r == 1 {
            (1, self.shape[0])
        } else {
            (self.shape[r - 2], self.shape[r - 1])
        }
    }

    /// Number of `height × width` planes stacked in the leading axes.
    pub fn planes(&self) -> usize {
        let (h, w) = self.hw();
        self.data.len() / (h * w)
    }

    /// Interpret as batch × channel × height × width. Rank 2 maps to
    /// `1×1×h×w` and rank 3 to `1×c×h×w`.
    pub fn dims4(&self) -> Result<[usize; 4]> {
        match *self.shape.as_slice() {
            [h, w] => Ok([1, 1, h, w]),
            [c, h, w] => Ok([1, c, h, w]),
            [b, c, h, w] => Ok([b, c, h, w]),
            _ => Err(Error::shape(format!(
                "expected a rank 2-4 grid, got shape {:?}",
                self.shape
            ))),
        }
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        check_shape(&shape)?;
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Replace the trailing two axes, keeping the leading ones.
    pub(crate) fn with_hw(&self, h: usize, w: usize) -> Vec<usize> {
        let mut shape = self.shape.clone();
        let r = shape.len();
        if r == 1 {
            shape = vec![h, w];
        } else {
            shape[r - 2] = h;
            shape[r - 1] = w;
        }
        shape
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| U::of(v.f64())).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn mean(&self) -> f64 {
        sum_f64(&self.data) / self.data.len() as f64
    }

    /// Slice out batch entry `b` of a 4-D tensor as `1×c×h×w`.
    pub fn batch_item(&self, b: usize) -> Result<Self> {
        let [n, c, h, w] = self.dims4()?;
        if b >= n {
            return Err(Error::shape(format!("batch index {b} out of range {n}")));
        }
        let len = c * h * w;
        Ok(Self {
            shape: vec![1, c, h, w],
            data: self.data[b * len..(b + 1) * len].to_vec(),
        })
    }

    /// Concatenate tensors along the batch axis. Every item must share the
    /// same `c×h×w`.
    pub fn stack(items: &[Self]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::shape("cannot stack an empty list"))?;
        let [_, c, h, w] = first.dims4()?;
        let mut data = Vec::with_capacity(items.len() * first.len());
        let mut n = 0;
        for t in items {
            let [b, c2, h2, w2] = t.dims4()?;
            if (c2, h2, w2) != (c, h, w) {
                return Err(Error::shape(format!(
                    "stack: item {c2}x{h2}x{w2} differs from {c}x{h}x{w}"
                )));
            }
            n += b;
            data.extend_from_slice(&t.data);
        }
        Ok(Self {
            shape: vec![n, c, h, w],
            data,
        })
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<T>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() {
        return Err(Error::shape("tensor rank must be at least 1"));
    }
    if let Some(axis) = shape.iter().position(|&d| d == 0) {
        return Err(Error::shape(format!(
            "dimension {axis} of {shape:?} is zero"
        )));
    }
    Ok(())
}
