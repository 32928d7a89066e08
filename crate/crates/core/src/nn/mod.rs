//! A small convolutional network engine.
//!
//! Activations are stored position-major: a [`Tensor`] holds
//! `samples x rows x cols` positions, each carrying `channels` values, as one
//! row-major matrix with one row per position. Convolutions are lowered to a
//! matrix product by gathering each position's window into one row
//! (im2col); the backward pass scatters the window gradients back.
//!
//! Everything is generic over [`Scalar`], so the same code runs in 64-bit
//! (default) or 32-bit precision.

mod checkpoint;
mod conv1d;
mod conv2d;
mod dense;
mod gradcheck;
mod network;
mod optim;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use ndarray::{Array1, Array2, LinalgScalar, ScalarOperand};
use num_traits::Float;
use thiserror::Error;

pub use checkpoint::{load_network, save_network, CheckpointError, NETWORK_MAGIC, NETWORK_VERSION};
pub use conv1d::BlockConv1d;
pub use conv2d::Conv2d;
pub use dense::Dense;
pub use gradcheck::{grad_check, GradCheckReport, ParamKind, ParamRef};
pub use network::{init_weights, mse_grad, mse_loss, Backward, ForwardCache, InitScheme, Layer, Network};
pub use optim::RmspropState;

/// Floating-point element type of a network.
pub trait Scalar:
    LinalgScalar
    + Float
    + ScalarOperand
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn into_f64(self) -> f64;
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn into_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn into_f64(self) -> f64 {
        f64::from(self)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NnError {
    #[error("{context}: expected {expected}, found {found}")]
    ShapeMismatch { context: &'static str, expected: usize, found: usize },
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("layer {0} needs a side input")]
    MissingSideInput(usize),
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<(), NnError> {
    if expected != found {
        return Err(NnError::ShapeMismatch { context, expected, found });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn apply<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Relu => relu(x),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the activation's output.
    pub fn derivative_from_output<S: Scalar>(self, out: S) -> S {
        match self {
            Activation::Relu => {
                if out > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Activation::Sigmoid => out * (S::one() - out),
        }
    }
}

pub fn relu<S: Scalar>(x: S) -> S {
    if x > S::zero() {
        x
    } else {
        S::zero()
    }
}

/// Logistic function, evaluated without overflow for any finite input.
pub fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// How a 1-D convolution treats windows that run past either end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Padding {
    Zero,
    Cyclic,
}

/// Position-major activations: `samples x rows x cols` positions by `channels`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    samples: usize,
    rows: usize,
    cols: usize,
    data: Array2<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(shape: [usize; 4]) -> Self {
        let [samples, rows, cols, channels] = shape;
        Self { samples, rows, cols, data: Array2::zeros((samples * rows * cols, channels)) }
    }

    /// Wraps row-major data of shape `[samples, rows, cols, channels]`.
    pub fn from_vec(shape: [usize; 4], data: Vec<S>) -> Result<Self, NnError> {
        let [samples, rows, cols, channels] = shape;
        check_dim("tensor data length", samples * rows * cols * channels, data.len())?;
        let data = Array2::from_shape_vec((samples * rows * cols, channels), data).expect("length checked");
        Ok(Self { samples, rows, cols, data })
    }

    pub fn from_matrix(samples: usize, rows: usize, cols: usize, data: Array2<S>) -> Result<Self, NnError> {
        check_dim("tensor positions", samples * rows * cols, data.nrows())?;
        // products of degenerate shapes can come back column-major
        let data = if data.is_standard_layout() { data } else { data.as_standard_layout().into_owned() };
        Ok(Self { samples, rows, cols, data })
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.samples, self.rows, self.cols, self.channels()]
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn channels(&self) -> usize {
        self.data.ncols()
    }

    /// Positions per sample.
    pub fn positions(&self) -> usize {
        self.rows * self.cols
    }

    /// One row per position.
    pub fn matrix(&self) -> &Array2<S> {
        &self.data
    }

    pub fn matrix_mut(&mut self) -> &mut Array2<S> {
        &mut self.data
    }

    pub fn as_slice(&self) -> &[S] {
        self.data.as_slice().expect("tensor data is contiguous")
    }

    pub fn into_vec(self) -> Vec<S> {
        let (v, _) = self.data.into_raw_vec_and_offset();
        v
    }

    /// Same data under a new shape with equal sample count and element count.
    pub fn reshaped(self, rows: usize, cols: usize, channels: usize) -> Result<Self, NnError> {
        let samples = self.samples;
        check_dim("reshaped length", self.data.len(), samples * rows * cols * channels)?;
        Self::from_vec([samples, rows, cols, channels], self.into_vec())
    }
}

/// Trainable parameters of one layer: weights, bias and optional side-input weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<S> {
    pub w: Array2<S>,
    pub b: Array1<S>,
    pub v: Option<Array2<S>>,
}

impl<S: Scalar> Params<S> {
    pub fn zeros(out: usize, fan_in: usize, side: Option<usize>) -> Self {
        Self { w: Array2::zeros((out, fan_in)), b: Array1::zeros(out), v: side.map(|d| Array2::zeros((out, d))) }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w: Array2::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
            v: self.v.as_ref().map(|v| Array2::zeros(v.raw_dim())),
        }
    }

    pub fn len(&self) -> usize {
        self.w.len() + self.b.len() + self.v.as_ref().map_or(0, |v| v.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parameter blocks in declaration order `w, b, v`.
    pub fn slices(&self) -> Vec<&[S]> {
        let mut out = vec![self.w.as_slice().expect("contiguous"), self.b.as_slice().expect("contiguous")];
        if let Some(v) = &self.v {
            out.push(v.as_slice().expect("contiguous"));
        }
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [S]> {
        let mut out = vec![self.w.as_slice_mut().expect("contiguous"), self.b.as_slice_mut().expect("contiguous")];
        if let Some(v) = &mut self.v {
            out.push(v.as_slice_mut().expect("contiguous"));
        }
        out
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn cast<T: Scalar>(&self) -> Params<T> {
        let conv = |x: &S| T::from_f64(x.into_f64());
        Params { w: self.w.map(conv), b: self.b.map(conv), v: self.v.as_ref().map(|v| v.map(conv)) }
    }
}
