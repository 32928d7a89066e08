use ndarray::Array2;

use super::{mse_grad, mse_loss, Network, NnError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    Side,
}

/// Location of one scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamRef {
    pub layer: usize,
    pub kind: ParamKind,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: Option<ParamRef>,
    pub checked: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

/// Gradients below this magnitude are compared in absolute terms.
const REL_FLOOR: f64 = 1e-6;

/// Compares backprop gradients of the MSE loss with central differences.
///
/// The error for each parameter is `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn grad_check(
    network: &Network<f64>,
    input: &Tensor<f64>,
    side: Option<&Array2<f64>>,
    target: &[f64],
    step: f64,
    tol: f64,
) -> Result<GradCheckReport, NnError> {
    let cache = network.forward_train(input, side)?;
    let analytic = network.backward(&cache, &mse_grad(cache.output(), target)?, false)?.grads;
    let loss = |net: &Network<f64>| -> Result<f64, NnError> { mse_loss(&net.forward(input, side)?, target) };

    let mut report = GradCheckReport { max_rel_error: 0.0, worst: None, checked: 0, tolerance: tol };
    let mut probe = network.clone();
    for (layer, grads) in analytic.iter().enumerate() {
        for (block, kind) in [ParamKind::Weight, ParamKind::Bias, ParamKind::Side].into_iter().enumerate() {
            let Some(g) = grads.slices().get(block).map(|s| s.to_vec()) else { continue };
            for (index, &a) in g.iter().enumerate() {
                let original = probe.layers()[layer].params().slices()[block][index];
                probe.layers_mut()[layer].params_mut().slices_mut()[block][index] = original + step;
                let up = loss(&probe)?;
                probe.layers_mut()[layer].params_mut().slices_mut()[block][index] = original - step;
                let down = loss(&probe)?;
                probe.layers_mut()[layer].params_mut().slices_mut()[block][index] = original;
                let numeric = (up - down) / (2.0 * step);
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
                report.checked += 1;
                if report.worst.is_none() || err > report.max_rel_error {
                    report.max_rel_error = err;
                    report.worst = Some(ParamRef { layer, kind, index });
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_weights, Activation, BlockConv1d, Conv2d, Dense, InitScheme, Layer, Padding};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn randomize_bias(net: &mut Network<f64>, rng: &mut ChaCha8Rng) {
        for layer in net.layers_mut() {
            layer.params_mut().b.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
    }

    #[test]
    fn conv1d_stacks() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for padding in [Padding::Zero, Padding::Cyclic] {
            let mut net = Network::new(vec![
                Layer::Conv1d(BlockConv1d::new(4, 3, 5, padding, Activation::Relu).unwrap()),
                Layer::Conv1d(BlockConv1d::new(5, 3, 3, padding, Activation::Sigmoid).unwrap()),
                Layer::Conv1d(BlockConv1d::new(3, 3, 1, padding, Activation::Sigmoid).unwrap()),
            ])
            .unwrap();
            init_weights(&mut net, InitScheme::FanInUniform, 7);
            randomize_bias(&mut net, &mut rng);
            let x = Tensor::from_vec([2, 1, 5, 4], random(&mut rng, 40)).unwrap();
            let target: Vec<f64> = (0..10).map(|i| (i % 2) as f64).collect();
            let r = grad_check(&net, &x, None, &target, 1e-5, 1e-4).unwrap();
            assert!(r.passed(), "{padding:?}: {r:?}");
            assert_eq!(r.checked, net.num_params());
        }
    }

    #[test]
    fn conv2d_with_side_and_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(102);
        let mut net = Network::new(vec![
            Layer::Conv2d(Conv2d::new(1, 1, 3, Some(4), Activation::Relu).unwrap()),
            Layer::Conv2d(Conv2d::new(3, 1, 2, None, Activation::Sigmoid).unwrap()),
            Layer::Dense(Dense::new(18, 4, Activation::Relu).unwrap()),
            Layer::Dense(Dense::new(4, 2, Activation::Sigmoid).unwrap()),
        ])
        .unwrap();
        init_weights(&mut net, InitScheme::FanInUniform, 8);
        randomize_bias(&mut net, &mut rng);
        let x = Tensor::from_vec([2, 3, 3, 1], random(&mut rng, 18)).unwrap();
        let side = Array2::from_shape_vec((2, 4), random(&mut rng, 8)).unwrap();
        let r = grad_check(&net, &x, Some(&side), &[1.0, 0.0, 0.0, 1.0], 1e-5, 1e-4).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn reports_broken_gradients() {
        let mut net = Network::new(vec![Layer::Dense(Dense::new(2, 1, Activation::Sigmoid).unwrap())]).unwrap();
        init_weights(&mut net, InitScheme::FanInUniform, 9);
        let x = Tensor::from_vec([1, 1, 1, 2], vec![0.3, 0.6]).unwrap();
        // a step far too large for the curvature makes the difference quotient inaccurate
        let r = grad_check(&net, &x, None, &[1.0], 10.0, 1e-4).unwrap();
        assert!(!r.passed());
        assert!(r.worst.is_some());
    }
}
