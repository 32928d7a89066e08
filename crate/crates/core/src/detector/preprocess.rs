use ndarray::Array2;
use num_complex::Complex64;

use super::DetectorError;
use crate::channel::{BandMatrix, BandedChannel, CyclicBandedChannel, TdmrChannel};
use crate::nn::{Scalar, Tensor};

/// Version tag of the input layout, recorded in detector checkpoints.
pub const PREPROCESS_VERSION: u16 = 1;

/// Network-ready view of one received frame.
#[derive(Debug, Clone, PartialEq)]
pub enum PreprocessedInput {
    /// `K` blocks of length `4B + 4`, concatenated: the `2B + 1` band
    /// coefficients of row `k` as interleaved `re, im` pairs, then `re y_k`,
    /// `im y_k`.
    Blocks { half_bandwidth: usize, data: Vec<f64> },
    /// Row-major receive grid and the row-major `(B+1) x (B+1)` response.
    Grid { rows: usize, cols: usize, y: Vec<f64>, taps: Vec<f64> },
}

impl PreprocessedInput {
    pub fn block_len(half_bandwidth: usize) -> usize {
        4 * half_bandwidth + 4
    }

    /// Number of detected symbols.
    pub fn positions(&self) -> usize {
        match self {
            PreprocessedInput::Blocks { half_bandwidth, data } => data.len() / Self::block_len(*half_bandwidth),
            PreprocessedInput::Grid { rows, cols, .. } => rows * cols,
        }
    }

    /// Block `k` of a 1-D input.
    pub fn block(&self, k: usize) -> Option<&[f64]> {
        match self {
            PreprocessedInput::Blocks { half_bandwidth, data } => {
                let len = Self::block_len(*half_bandwidth);
                data.get(k * len..(k + 1) * len)
            }
            PreprocessedInput::Grid { .. } => None,
        }
    }
}

/// Builds the block layout from any band-stored channel. Off-matrix slots of
/// a banded channel are zero; a cyclic channel fills them by wrapping.
pub fn preprocess<C: BandMatrix>(channel: &C, y: &[Complex64]) -> Result<PreprocessedInput, DetectorError> {
    let k_len = channel.size();
    if y.len() != k_len {
        return Err(DetectorError::DimensionMismatch { expected: k_len, found: y.len() });
    }
    let b = channel.half_bandwidth();
    let len = PreprocessedInput::block_len(b);
    let mut data = vec![0.0; k_len * len];
    for (k, block) in data.chunks_exact_mut(len).enumerate() {
        for j in 0..channel.width() {
            if channel.column(k, j).is_some() {
                let h = channel.coeff(k, j);
                block[2 * j] = h.re;
                block[2 * j + 1] = h.im;
            }
        }
        block[len - 2] = y[k].re;
        block[len - 1] = y[k].im;
    }
    Ok(PreprocessedInput::Blocks { half_bandwidth: b, data })
}

pub fn preprocess_banded(channel: &BandedChannel, y: &[Complex64]) -> Result<PreprocessedInput, DetectorError> {
    preprocess(channel, y)
}

/// Block `k` holds `H[k][(k - B + i) mod K]` for `i = 0..=2B`.
pub fn preprocess_cyclic(channel: &CyclicBandedChannel, y: &[Complex64]) -> Result<PreprocessedInput, DetectorError> {
    preprocess(channel, y)
}

pub fn preprocess_grid(channel: &TdmrChannel, y: &[f64]) -> Result<PreprocessedInput, DetectorError> {
    let n = channel.rows() * channel.cols();
    if y.len() != n {
        return Err(DetectorError::DimensionMismatch { expected: n, found: y.len() });
    }
    Ok(PreprocessedInput::Grid {
        rows: channel.rows(),
        cols: channel.cols(),
        y: y.to_vec(),
        taps: channel.taps().to_vec(),
    })
}

/// Stacks same-shaped inputs into one batch tensor plus side features.
pub fn stack_inputs<S: Scalar>(inputs: &[PreprocessedInput]) -> Result<(Tensor<S>, Option<Array2<S>>), DetectorError> {
    let first = inputs.first().ok_or(DetectorError::EmptyBatch)?;
    let conv = |v: &f64| S::from_f64(*v);
    match first {
        PreprocessedInput::Blocks { half_bandwidth, data } => {
            let len = PreprocessedInput::block_len(*half_bandwidth);
            let mut all = Vec::with_capacity(inputs.len() * data.len());
            for input in inputs {
                match input {
                    PreprocessedInput::Blocks { half_bandwidth: b, data: d } if *b == *half_bandwidth => {
                        if d.len() != data.len() {
                            return Err(DetectorError::DimensionMismatch { expected: data.len(), found: d.len() });
                        }
                        all.extend(d.iter().map(conv));
                    }
                    _ => return Err(DetectorError::MixedBatch),
                }
            }
            let tensor = Tensor::from_vec([inputs.len(), 1, data.len() / len, len], all)?;
            Ok((tensor, None))
        }
        PreprocessedInput::Grid { rows, cols, taps, .. } => {
            let mut all = Vec::with_capacity(inputs.len() * rows * cols);
            let mut side = Vec::with_capacity(inputs.len() * taps.len());
            for input in inputs {
                match input {
                    PreprocessedInput::Grid { rows: r, cols: c, y, taps: t }
                        if r == rows && c == cols && t.len() == taps.len() =>
                    {
                        all.extend(y.iter().map(conv));
                        side.extend(t.iter().map(conv));
                    }
                    _ => return Err(DetectorError::MixedBatch),
                }
            }
            let tensor = Tensor::from_vec([inputs.len(), *rows, *cols, 1], all)?;
            let side = Array2::from_shape_vec((inputs.len(), taps.len()), side).expect("lengths match");
            Ok((tensor, Some(side)))
        }
    }
}
