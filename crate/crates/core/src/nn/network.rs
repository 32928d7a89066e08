use ndarray::{s, Array2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_dim, Activation, BlockConv1d, Conv2d, Dense, NnError, Params, Scalar, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<S> {
    Conv1d(BlockConv1d<S>),
    Conv2d(Conv2d<S>),
    Dense(Dense<S>),
}

impl<S: Scalar> Layer<S> {
    pub fn params(&self) -> &Params<S> {
        match self {
            Layer::Conv1d(l) => &l.params,
            Layer::Conv2d(l) => &l.params,
            Layer::Dense(l) => &l.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut Params<S> {
        match self {
            Layer::Conv1d(l) => &mut l.params,
            Layer::Conv2d(l) => &mut l.params,
            Layer::Dense(l) => &mut l.params,
        }
    }

    pub fn activation(&self) -> Activation {
        match self {
            Layer::Conv1d(l) => l.activation,
            Layer::Conv2d(l) => l.activation,
            Layer::Dense(l) => l.activation,
        }
    }

    pub fn out_channels(&self) -> usize {
        match self {
            Layer::Conv1d(l) => l.out_depth,
            Layer::Conv2d(l) => l.out_depth,
            Layer::Dense(l) => l.out_dim,
        }
    }

    /// Channels expected per input position, where fixed by the layer.
    pub fn in_channels(&self) -> Option<usize> {
        match self {
            Layer::Conv1d(l) => Some(l.in_block),
            Layer::Conv2d(l) => Some(l.in_depth),
            Layer::Dense(_) => None,
        }
    }

    fn output_shape(&self, input: [usize; 4]) -> [usize; 4] {
        let [samples, rows, cols, _] = input;
        match self {
            Layer::Conv1d(l) => [samples, rows, cols, l.out_depth],
            Layer::Conv2d(l) => [samples, rows, cols, l.out_depth],
            Layer::Dense(l) => [samples, 1, 1, l.out_dim],
        }
    }

    fn gather(&self, x: &Tensor<S>) -> Result<Array2<S>, NnError> {
        match self {
            Layer::Conv1d(l) => l.gather(x),
            Layer::Conv2d(l) => l.gather(x),
            Layer::Dense(l) => l.gather(x),
        }
    }

    fn scatter(&self, dcols: &Array2<S>, input_shape: [usize; 4]) -> Tensor<S> {
        match self {
            Layer::Conv1d(l) => l.scatter(dcols, input_shape),
            Layer::Conv2d(l) => l.scatter(dcols, input_shape),
            Layer::Dense(l) => l.scatter(dcols, input_shape),
        }
    }

    fn cast<T: Scalar>(&self) -> Layer<T> {
        match self {
            Layer::Conv1d(l) => Layer::Conv1d(BlockConv1d {
                in_block: l.in_block,
                window_blocks: l.window_blocks,
                out_depth: l.out_depth,
                padding: l.padding,
                activation: l.activation,
                params: l.params.cast(),
            }),
            Layer::Conv2d(l) => Layer::Conv2d(Conv2d {
                in_depth: l.in_depth,
                radius: l.radius,
                out_depth: l.out_depth,
                side_dim: l.side_dim,
                activation: l.activation,
                params: l.params.cast(),
            }),
            Layer::Dense(l) => Layer::Dense(Dense {
                in_dim: l.in_dim,
                out_dim: l.out_dim,
                activation: l.activation,
                params: l.params.cast(),
            }),
        }
    }
}

/// Activations kept by a training forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<S> {
    input_shapes: Vec<[usize; 4]>,
    gathered: Vec<Array2<S>>,
    outputs: Vec<Tensor<S>>,
    side: Option<Array2<S>>,
}

impl<S: Scalar> ForwardCache<S> {
    pub fn output(&self) -> &Tensor<S> {
        self.outputs.last().expect("networks are nonempty")
    }
}

/// Parameter gradients, plus the input gradient when requested.
#[derive(Debug, Clone)]
pub struct Backward<S> {
    pub grads: Vec<Params<S>>,
    pub input: Option<Tensor<S>>,
}

/// An ordered stack of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<S> {
    layers: Vec<Layer<S>>,
}

impl<S: Scalar> Network<S> {
    pub fn new(layers: Vec<Layer<S>>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::InvalidArchitecture("a network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if let (Some(want), Layer::Conv1d(_) | Layer::Conv2d(_)) = (pair[1].in_channels(), &pair[0]) {
                check_dim("adjacent layer depth", want, pair[0].out_channels())?;
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer<S>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<S>] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.params().len()).sum()
    }

    pub fn params(&self) -> Vec<&Params<S>> {
        self.layers.iter().map(Layer::params).collect()
    }

    pub fn cast<T: Scalar>(&self) -> Network<T> {
        Network { layers: self.layers.iter().map(Layer::cast).collect() }
    }

    fn layer_forward(
        &self,
        index: usize,
        x: &Tensor<S>,
        side: Option<&Array2<S>>,
    ) -> Result<(Array2<S>, Tensor<S>), NnError> {
        let layer = &self.layers[index];
        let params = layer.params();
        let cols = layer.gather(x)?;
        let mut z = cols.dot(&params.w.t());
        z += &params.b;
        let out_shape = layer.output_shape(x.shape());
        if let Some(v) = &params.v {
            let side = side.ok_or(NnError::MissingSideInput(index))?;
            check_dim("side input samples", x.samples(), side.nrows())?;
            check_dim("side input width", v.ncols(), side.ncols())?;
            let sv = side.dot(&v.t());
            let per = out_shape[1] * out_shape[2];
            for (s, row) in sv.outer_iter().enumerate() {
                let mut block = z.slice_mut(s![s * per..(s + 1) * per, ..]);
                block += &row;
            }
        }
        let act = layer.activation();
        z.mapv_inplace(|t| act.apply(t));
        let out = Tensor::from_matrix(out_shape[0], out_shape[1], out_shape[2], z)?;
        Ok((cols, out))
    }

    /// Inference pass. `side` holds one row of side features per sample.
    pub fn forward(&self, x: &Tensor<S>, side: Option<&Array2<S>>) -> Result<Tensor<S>, NnError> {
        let (_, mut cur) = self.layer_forward(0, x, side)?;
        for i in 1..self.layers.len() {
            cur = self.layer_forward(i, &cur, side)?.1;
        }
        Ok(cur)
    }

    /// Forward pass that keeps what [`backward`](Self::backward) needs.
    pub fn forward_train(&self, x: &Tensor<S>, side: Option<&Array2<S>>) -> Result<ForwardCache<S>, NnError> {
        let mut cache = ForwardCache {
            input_shapes: Vec::with_capacity(self.layers.len()),
            gathered: Vec::with_capacity(self.layers.len()),
            outputs: Vec::with_capacity(self.layers.len()),
            side: side.cloned(),
        };
        for i in 0..self.layers.len() {
            let input = if i == 0 { x } else { &cache.outputs[i - 1] };
            let shape = input.shape();
            let (cols, out) = self.layer_forward(i, input, side)?;
            cache.input_shapes.push(shape);
            cache.gathered.push(cols);
            cache.outputs.push(out);
        }
        Ok(cache)
    }

    /// Reverse-mode gradients given `dout`, the loss gradient with respect to
    /// the network output.
    pub fn backward(
        &self,
        cache: &ForwardCache<S>,
        dout: &Tensor<S>,
        input_grad: bool,
    ) -> Result<Backward<S>, NnError> {
        check_dim("output gradient length", cache.output().as_slice().len(), dout.as_slice().len())?;
        let mut grads: Vec<Params<S>> = Vec::with_capacity(self.layers.len());
        let mut grad = dout.matrix().clone();
        let mut input = None;
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let params = layer.params();
            let act = layer.activation();
            let out = cache.outputs[i].matrix();
            Zip::from(&mut grad).and(out).for_each(|g, &o| *g *= act.derivative_from_output(o));
            let delta = grad;
            let gw = delta.t().dot(&cache.gathered[i]);
            let gb = delta.sum_axis(Axis(0));
            let gv = match (&params.v, &cache.side) {
                (Some(_), Some(side)) => {
                    let samples = cache.outputs[i].samples();
                    let per = delta.nrows() / samples;
                    let mut sums = Array2::zeros((samples, delta.ncols()));
                    for s in 0..samples {
                        sums.row_mut(s).assign(&delta.slice(s![s * per..(s + 1) * per, ..]).sum_axis(Axis(0)));
                    }
                    Some(sums.t().dot(side))
                }
                (Some(_), None) => return Err(NnError::MissingSideInput(i)),
                _ => None,
            };
            grads.push(Params { w: gw, b: gb, v: gv });
            if i > 0 || input_grad {
                let dcols = delta.dot(&params.w);
                let back = layer.scatter(&dcols, cache.input_shapes[i]);
                if i == 0 {
                    input = Some(back);
                    grad = Array2::zeros((0, 0));
                } else {
                    grad = back.matrix().clone();
                }
            } else {
                grad = Array2::zeros((0, 0));
            }
        }
        grads.reverse();
        Ok(Backward { grads, input })
    }
}

/// Mean of squared differences over every output value.
pub fn mse_loss<S: Scalar>(output: &Tensor<S>, target: &[S]) -> Result<S, NnError> {
    let out = output.as_slice();
    check_dim("target length", out.len(), target.len())?;
    let sum: S = out.iter().zip(target).map(|(&o, &t)| (o - t) * (o - t)).sum();
    Ok(sum / S::from_f64(out.len() as f64))
}

/// Gradient of [`mse_loss`] with respect to the output.
pub fn mse_grad<S: Scalar>(output: &Tensor<S>, target: &[S]) -> Result<Tensor<S>, NnError> {
    let out = output.as_slice();
    check_dim("target length", out.len(), target.len())?;
    let scale = S::from_f64(2.0 / out.len() as f64);
    let data = out.iter().zip(target).map(|(&o, &t)| scale * (o - t)).collect();
    Tensor::from_vec(output.shape(), data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    /// `w ~ U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`, zero bias.
    FanInUniform,
    Zeros,
}

/// Re-initializes every parameter; deterministic in `seed`.
pub fn init_weights<S: Scalar>(network: &mut Network<S>, scheme: InitScheme, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fill = |m: &mut Array2<S>, rng: &mut ChaCha8Rng| {
        let bound = (6.0 / m.ncols() as f64).sqrt();
        for x in m.iter_mut() {
            *x = match scheme {
                InitScheme::FanInUniform => S::from_f64(rng.random_range(-bound..bound)),
                InitScheme::Zeros => S::zero(),
            };
        }
    };
    for layer in network.layers_mut() {
        let p = layer.params_mut();
        fill(&mut p.w, &mut rng);
        p.b.fill(S::zero());
        if let Some(v) = &mut p.v {
            fill(v, &mut rng);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Padding};
    use ndarray::Array1;

    #[test]
    fn single_sigmoid_unit_gradient() {
        let mut layer = Dense::<f64>::new(2, 1, Activation::Sigmoid).unwrap();
        layer.params.w = Array2::from_shape_vec((1, 2), vec![0.3, -0.8]).unwrap();
        layer.params.b = Array1::from_vec(vec![0.1]);
        let net = Network::new(vec![Layer::Dense(layer)]).unwrap();
        let x = Tensor::from_vec([1, 1, 1, 2], vec![1.5, 0.4]).unwrap();
        let cache = net.forward_train(&x, None).unwrap();
        let o = cache.output().as_slice()[0];
        let t = 1.0;
        let back = net.backward(&cache, &mse_grad(cache.output(), &[t]).unwrap(), false).unwrap();
        let common = 2.0 * (o - t) * o * (1.0 - o);
        assert!((back.grads[0].w[[0, 0]] - common * 1.5).abs() < 1e-15);
        assert!((back.grads[0].w[[0, 1]] - common * 0.4).abs() < 1e-15);
        assert!((back.grads[0].b[0] - common).abs() < 1e-15);
    }

    #[test]
    fn mse_values() {
        let out = Tensor::from_vec([1, 1, 4, 1], vec![0.5; 4]).unwrap();
        assert_eq!(mse_loss(&out, &[0.0, 1.0, 1.0, 0.0]).unwrap(), 0.25);
        assert_eq!(mse_loss(&out, &[0.5; 4]).unwrap(), 0.0);
        let vals = [0.1, 0.7, 0.35, 0.9];
        let tgt = [0.0, 1.0, 0.0, 1.0];
        let out = Tensor::from_vec([2, 1, 2, 1], vals.to_vec()).unwrap();
        let mut independent = 0.0f64;
        for i in 0..4 {
            independent += (vals[i] - tgt[i]) * (vals[i] - tgt[i]) / 4.0;
        }
        assert!((mse_loss(&out, &tgt).unwrap() - independent).abs() < 1e-15);
    }

    #[test]
    fn dead_relu_units_pass_no_gradient() {
        let hidden = BlockConv1d::<f64>::new(2, 3, 4, Padding::Zero, Activation::Relu).unwrap();
        let mut head = BlockConv1d::<f64>::new(4, 3, 1, Padding::Zero, Activation::Sigmoid).unwrap();
        head.params.w.fill(0.7);
        let net = Network::new(vec![Layer::Conv1d(hidden), Layer::Conv1d(head)]).unwrap();
        let x = Tensor::from_vec([1, 1, 3, 2], vec![0.3, -1.0, 2.0, 0.5, -0.2, 0.9]).unwrap();
        let cache = net.forward_train(&x, None).unwrap();
        let back = net.backward(&cache, &mse_grad(cache.output(), &[1.0, 0.0, 1.0]).unwrap(), true).unwrap();
        assert!(back.grads[0].w.iter().all(|&g| g == 0.0));
        assert!(back.grads[0].b.iter().all(|&g| g == 0.0));
        assert!(back.input.unwrap().as_slice().iter().all(|&g| g == 0.0));
        assert!(back.grads[1].b[0] != 0.0);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let build = || {
            Network::<f64>::new(vec![
                Layer::Conv1d(BlockConv1d::new(8, 3, 16, Padding::Zero, Activation::Relu).unwrap()),
                Layer::Conv1d(BlockConv1d::new(16, 3, 1, Padding::Zero, Activation::Sigmoid).unwrap()),
            ])
            .unwrap()
        };
        let (mut a, mut b, mut c) = (build(), build(), build());
        init_weights(&mut a, InitScheme::FanInUniform, 1);
        init_weights(&mut b, InitScheme::FanInUniform, 1);
        init_weights(&mut c, InitScheme::FanInUniform, 2);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let bound = (6.0f64 / 24.0).sqrt();
        assert!(a.layers()[0].params().w.iter().all(|w| w.abs() <= bound));
        assert!(a.layers()[0].params().b.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn rejects_mismatched_stack() {
        let err = Network::<f64>::new(vec![
            Layer::Conv1d(BlockConv1d::new(8, 3, 16, Padding::Zero, Activation::Relu).unwrap()),
            Layer::Conv1d(BlockConv1d::new(12, 3, 1, Padding::Zero, Activation::Sigmoid).unwrap()),
        ]);
        assert!(matches!(err, Err(NnError::ShapeMismatch { .. })));
        assert!(Network::<f64>::new(vec![]).is_err());
    }
}
