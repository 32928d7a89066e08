use ndarray::Array2;

use super::{check_dim, Activation, NnError, Padding, Params, Scalar, Tensor};

/// Block-strided 1-D convolution.
///
/// The input is a sequence of `K` blocks of length `in_block`. Output
/// position `k` sees the concatenation of blocks `k - h ..= k + h`
/// (`h = window_blocks / 2`) and produces `out_depth` values, so the stride
/// equals the block length and there are as many outputs as input blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockConv1d<S> {
    pub in_block: usize,
    pub window_blocks: usize,
    pub out_depth: usize,
    pub padding: Padding,
    pub activation: Activation,
    /// `w` is `out_depth x (window_blocks * in_block)`.
    pub params: Params<S>,
}

impl<S: Scalar> BlockConv1d<S> {
    pub fn new(
        in_block: usize,
        window_blocks: usize,
        out_depth: usize,
        padding: Padding,
        activation: Activation,
    ) -> Result<Self, NnError> {
        if window_blocks.is_multiple_of(2) || in_block == 0 || out_depth == 0 {
            return Err(NnError::InvalidArchitecture(format!(
                "conv1d needs an odd window and positive sizes (in {in_block}, window {window_blocks}, out {out_depth})"
            )));
        }
        Ok(Self {
            in_block,
            window_blocks,
            out_depth,
            padding,
            activation,
            params: Params::zeros(out_depth, window_blocks * in_block, None),
        })
    }

    pub fn half_window(&self) -> usize {
        self.window_blocks / 2
    }

    /// Input block feeding window slot `j` of output `pos`, if any.
    fn source(&self, pos: usize, j: usize, len: usize) -> Option<usize> {
        let src = pos as isize + j as isize - self.half_window() as isize;
        match self.padding {
            Padding::Cyclic => Some(src.rem_euclid(len as isize) as usize),
            Padding::Zero => (0..len as isize).contains(&src).then_some(src as usize),
        }
    }

    /// One row per output position holding its window.
    pub(crate) fn gather(&self, x: &Tensor<S>) -> Result<Array2<S>, NnError> {
        check_dim("conv1d input block", self.in_block, x.channels())?;
        check_dim("conv1d input rows", 1, x.rows())?;
        let (len, c) = (x.cols(), self.in_block);
        let src = x.as_slice();
        let mut cols = Array2::zeros((x.samples() * len, self.window_blocks * c));
        let dst = cols.as_slice_mut().expect("fresh array");
        let width = self.window_blocks * c;
        for s in 0..x.samples() {
            for pos in 0..len {
                let row = s * len + pos;
                for j in 0..self.window_blocks {
                    if let Some(m) = self.source(pos, j, len) {
                        let from = (s * len + m) * c;
                        dst[row * width + j * c..row * width + (j + 1) * c].copy_from_slice(&src[from..from + c]);
                    }
                }
            }
        }
        Ok(cols)
    }

    /// Adjoint of [`gather`](Self::gather).
    pub(crate) fn scatter(&self, dcols: &Array2<S>, input_shape: [usize; 4]) -> Tensor<S> {
        let [samples, rows, len, c] = input_shape;
        let mut out = Tensor::zeros(input_shape);
        let dst = out.matrix_mut().as_slice_mut().expect("fresh array");
        let src = dcols.as_slice().expect("contiguous");
        let width = self.window_blocks * c;
        debug_assert_eq!(rows, 1);
        for s in 0..samples {
            for pos in 0..len {
                let row = s * len + pos;
                for j in 0..self.window_blocks {
                    if let Some(m) = self.source(pos, j, len) {
                        let to = (s * len + m) * c;
                        let from = row * width + j * c;
                        for (d, g) in dst[to..to + c].iter_mut().zip(&src[from..from + c]) {
                            *d += *g;
                        }
                    }
                }
            }
        }
        out
    }
}
