//! Rank-4 tensors and the network's forward/backward kernels.
//!
//! Everything is a pure function over `Tensor4`: direct 'same'-padded
//! convolution, 2x2 max pooling, 2x nearest upsampling, ReLU, channel
//! concatenation and softmax cross-entropy, each with a hand-written
//! backward pass. There is no autodiff graph; the network module composes
//! these kernels and replays them in reverse.
//!
//! Kernels are generic over [`Scalar`]: training runs on `f32`, the
//! finite-difference verification harness on `f64`.

use std::fmt;

use num_traits::Float;
use thiserror::Error;

pub mod gradcheck;
pub mod ops;

/// Element type the kernels operate on.
pub trait Scalar:
    Float + num_traits::NumAssign + std::iter::Sum + Send + Sync + fmt::Debug + fmt::Display + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("data length {len} does not match dims {dims}")]
    BadLength { len: usize, dims: Dims4 },
    #[error("{op}: input has {input} channels, kernel expects {kernel}")]
    ChannelMismatch { op: &'static str, input: usize, kernel: usize },
    #[error("{op}: expected dims {expected}, found {found}")]
    ShapeMismatch { op: &'static str, expected: Dims4, found: Dims4 },
    #[error("{op}: spatial dims {h}x{w} must be even")]
    OddSpatial { op: &'static str, h: usize, w: usize },
    #[error("{op}: kernel size {kh}x{kw} unsupported ('same' padding needs odd sizes)")]
    EvenKernel { op: &'static str, kh: usize, kw: usize },
    #[error("{op}: non-finite value in input")]
    NonFinite { op: &'static str },
    #[error("label {label} outside the {classes}-class range")]
    LabelOutOfRange { label: u8, classes: usize },
    #[error("label count {len} does not match {expected} pixels")]
    BadLabelCount { len: usize, expected: usize },
    #[error("class weight count {len} does not match {classes} classes")]
    BadWeightCount { len: usize, classes: usize },
    #[error("pool index {index} out of range for input of {len} elements")]
    IndexOutOfRange { index: usize, len: usize },
}

/// Dimensions of a rank-4 tensor: batch, channels, height, width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims4 {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Dims4 {
    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self { n, c, h, w }
    }

    pub fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Dims4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}

/// Dense rank-4 array in NCHW order, row-major within each plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T: Scalar = f32> {
    dims: Dims4,
    data: Vec<T>,
}

impl<T: Scalar> Tensor4<T> {
    pub fn zeros(dims: Dims4) -> Self {
        Self { dims, data: vec![T::zero(); dims.len()] }
    }

    pub fn from_vec(dims: Dims4, data: Vec<T>) -> Result<Self, TensorError> {
        if data.len() != dims.len() {
            return Err(TensorError::BadLength { len: data.len(), dims });
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> Dims4 {
        self.dims
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

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> T {
        self.data[((n * self.dims.c + c) * self.dims.h + y) * self.dims.w + x]
    }

    #[inline]
    pub fn at_mut(&mut self, n: usize, c: usize, y: usize, x: usize) -> &mut T {
        &mut self.data[((n * self.dims.c + c) * self.dims.h + y) * self.dims.w + x]
    }

    /// The `h*w` slice holding one channel of one batch item.
    #[inline]
    pub fn plane(&self, n: usize, c: usize) -> &[T] {
        let hw = self.dims.h * self.dims.w;
        let start = (n * self.dims.c + c) * hw;
        &self.data[start..start + hw]
    }

    #[inline]
    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [T] {
        let hw = self.dims.h * self.dims.w;
        let start = (n * self.dims.c + c) * hw;
        &mut self.data[start..start + hw]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Convert element type (used by the f64 verification harness).
    pub fn cast<U: Scalar>(&self) -> Tensor4<U> {
        Tensor4 {
            dims: self.dims,
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }
}

/// Convolution filter bank with per-output-channel bias.
///
/// Weights are laid out `[out_c][in_c][kh][kw]`, row-major. Interior
/// convolutions are 3x3; the output head is 1x1. 'Same' zero padding
/// requires odd kernel sides.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel<T: Scalar = f32> {
    pub out_c: usize,
    pub in_c: usize,
    pub kh: usize,
    pub kw: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> ConvKernel<T> {
    pub fn zeros(out_c: usize, in_c: usize, kh: usize, kw: usize) -> Self {
        Self { out_c, in_c, kh, kw, weights: vec![T::zero(); out_c * in_c * kh * kw], bias: vec![T::zero(); out_c] }
    }

    pub fn from_parts(
        out_c: usize,
        in_c: usize,
        kh: usize,
        kw: usize,
        weights: Vec<T>,
        bias: Vec<T>,
    ) -> Result<Self, TensorError> {
        if weights.len() != out_c * in_c * kh * kw || bias.len() != out_c {
            return Err(TensorError::BadLength {
                len: weights.len(),
                dims: Dims4::new(out_c, in_c, kh, kw),
            });
        }
        Ok(Self { out_c, in_c, kh, kw, weights, bias })
    }

    #[inline]
    pub fn weight(&self, oc: usize, ic: usize, ky: usize, kx: usize) -> T {
        self.weights[((oc * self.in_c + ic) * self.kh + ky) * self.kw + kx]
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn cast<U: Scalar>(&self) -> ConvKernel<U> {
        ConvKernel {
            out_c: self.out_c,
            in_c: self.in_c,
            kh: self.kh,
            kw: self.kw,
            weights: self.weights.iter().map(|v| U::from_f64(v.as_f64())).collect(),
            bias: self.bias.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_is_nchw_row_major() {
        let dims = Dims4::new(2, 3, 4, 5);
        let data: Vec<f32> = (0..dims.len()).map(|i| i as f32).collect();
        let t = Tensor4::from_vec(dims, data).unwrap();
        assert_eq!(t.at(0, 0, 0, 0), 0.0);
        assert_eq!(t.at(0, 0, 0, 4), 4.0);
        assert_eq!(t.at(0, 0, 1, 0), 5.0);
        assert_eq!(t.at(0, 1, 0, 0), 20.0);
        assert_eq!(t.at(1, 0, 0, 0), 60.0);
        assert_eq!(t.plane(1, 2)[0], t.at(1, 2, 0, 0));
    }

    #[test]
    fn bad_length_is_rejected() {
        let r = Tensor4::<f32>::from_vec(Dims4::new(1, 1, 2, 2), vec![0.0; 3]);
        assert!(matches!(r, Err(TensorError::BadLength { .. })));
    }
}
