use ndarray::Array2;

use super::{check_dim, Activation, NnError, Params, Scalar, Tensor};

/// 2-D convolution over a `(2R+1) x (2R+1)` window with zero padding.
///
/// `z[n][k] = act(sum_{m,l} w[m][l] z_prev[n+m-R][k+l-R] + sum_t v[t] h[t] + b)`.
/// The optional side input `h` is a per-sample vector (the channel taps) that
/// is the same for every output position.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<S> {
    pub in_depth: usize,
    pub radius: usize,
    pub out_depth: usize,
    pub side_dim: Option<usize>,
    pub activation: Activation,
    /// `w` is `out_depth x ((2R+1)^2 * in_depth)`, taps row-major then input
    /// channel; `v` is `out_depth x side_dim`.
    pub params: Params<S>,
}

impl<S: Scalar> Conv2d<S> {
    pub fn new(
        in_depth: usize,
        radius: usize,
        out_depth: usize,
        side_dim: Option<usize>,
        activation: Activation,
    ) -> Result<Self, NnError> {
        if in_depth == 0 || out_depth == 0 || side_dim == Some(0) {
            return Err(NnError::InvalidArchitecture("conv2d sizes must be positive".into()));
        }
        let side = 2 * radius + 1;
        Ok(Self {
            in_depth,
            radius,
            out_depth,
            side_dim,
            activation,
            params: Params::zeros(out_depth, side * side * in_depth, side_dim),
        })
    }

    pub fn window(&self) -> usize {
        2 * self.radius + 1
    }

    fn for_each_tap(&self, shape: [usize; 4], mut f: impl FnMut(usize, usize, usize)) {
        let [samples, rows, cols, _] = shape;
        let (r, w) = (self.radius as isize, self.window());
        for s in 0..samples {
            for n in 0..rows {
                for k in 0..cols {
                    let out_row = (s * rows + n) * cols + k;
                    for m in 0..w {
                        let rr = n as isize + m as isize - r;
                        if rr < 0 || rr >= rows as isize {
                            continue;
                        }
                        for l in 0..w {
                            let cc = k as isize + l as isize - r;
                            if cc < 0 || cc >= cols as isize {
                                continue;
                            }
                            let in_row = (s * rows + rr as usize) * cols + cc as usize;
                            f(out_row, m * w + l, in_row);
                        }
                    }
                }
            }
        }
    }

    pub(crate) fn gather(&self, x: &Tensor<S>) -> Result<Array2<S>, NnError> {
        check_dim("conv2d input depth", self.in_depth, x.channels())?;
        let c = self.in_depth;
        let width = self.window() * self.window() * c;
        let mut cols = Array2::zeros((x.samples() * x.positions(), width));
        let dst = cols.as_slice_mut().expect("fresh array");
        let src = x.as_slice();
        self.for_each_tap(x.shape(), |out_row, tap, in_row| {
            dst[out_row * width + tap * c..out_row * width + (tap + 1) * c]
                .copy_from_slice(&src[in_row * c..(in_row + 1) * c]);
        });
        Ok(cols)
    }

    pub(crate) fn scatter(&self, dcols: &Array2<S>, input_shape: [usize; 4]) -> Tensor<S> {
        let c = self.in_depth;
        let width = self.window() * self.window() * c;
        let mut out = Tensor::zeros(input_shape);
        let dst = out.matrix_mut().as_slice_mut().expect("fresh array");
        let src = dcols.as_slice().expect("contiguous");
        self.for_each_tap(input_shape, |out_row, tap, in_row| {
            let from = out_row * width + tap * c;
            for (d, g) in dst[in_row * c..(in_row + 1) * c].iter_mut().zip(&src[from..from + c]) {
                *d += *g;
            }
        });
        out
    }
}
