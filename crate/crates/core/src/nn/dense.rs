use ndarray::Array2;

use super::{check_dim, Activation, NnError, Params, Scalar, Tensor};

/// Fully connected layer over all positions and channels of a sample.
///
/// The output has one position per sample with `out_dim` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<S> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    /// `w` is `out_dim x in_dim`.
    pub params: Params<S>,
}

impl<S: Scalar> Dense<S> {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Result<Self, NnError> {
        if in_dim == 0 || out_dim == 0 {
            return Err(NnError::InvalidArchitecture("dense sizes must be positive".into()));
        }
        Ok(Self { in_dim, out_dim, activation, params: Params::zeros(out_dim, in_dim, None) })
    }

    pub(crate) fn gather(&self, x: &Tensor<S>) -> Result<Array2<S>, NnError> {
        let per_sample = x.positions() * x.channels();
        check_dim("dense input width", self.in_dim, per_sample)?;
        Ok(Array2::from_shape_vec((x.samples(), per_sample), x.as_slice().to_vec()).expect("length matches"))
    }

    pub(crate) fn scatter(&self, dcols: &Array2<S>, input_shape: [usize; 4]) -> Tensor<S> {
        Tensor::from_vec(input_shape, dcols.as_slice().expect("contiguous").to_vec()).expect("length matches")
    }
}
