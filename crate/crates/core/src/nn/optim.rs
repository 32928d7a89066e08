use super::{check_dim, Network, NnError, Params, Scalar};

/// RMSprop: `acc = rho acc + (1 - rho) g^2`, `p -= lr g / sqrt(acc + eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RmspropState<S> {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    acc: Vec<Params<S>>,
}

impl<S: Scalar> RmspropState<S> {
    pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;
    pub const DEFAULT_DECAY: f64 = 0.9;
    pub const DEFAULT_EPSILON: f64 = 1e-8;

    pub fn new(network: &Network<S>, learning_rate: f64, decay: f64, epsilon: f64) -> Self {
        let acc = network.params().into_iter().map(Params::zeros_like).collect();
        Self { learning_rate, decay, epsilon, acc }
    }

    pub fn with_defaults(network: &Network<S>) -> Self {
        Self::new(network, Self::DEFAULT_LEARNING_RATE, Self::DEFAULT_DECAY, Self::DEFAULT_EPSILON)
    }

    pub fn accumulators(&self) -> &[Params<S>] {
        &self.acc
    }

    pub fn step(&mut self, network: &mut Network<S>, grads: &[Params<S>]) -> Result<(), NnError> {
        check_dim("gradient layer count", self.acc.len(), grads.len())?;
        let lr = S::from_f64(self.learning_rate);
        let rho = S::from_f64(self.decay);
        let keep = S::one() - rho;
        let eps = S::from_f64(self.epsilon);
        for ((layer, acc), grad) in network.layers_mut().iter_mut().zip(&mut self.acc).zip(grads) {
            check_dim("gradient size", acc.len(), grad.len())?;
            for ((p, a), g) in layer.params_mut().slices_mut().into_iter().zip(acc.slices_mut()).zip(grad.slices()) {
                check_dim("gradient block size", p.len(), g.len())?;
                for ((p, a), &g) in p.iter_mut().zip(a.iter_mut()).zip(g) {
                    *a = rho * *a + keep * g * g;
                    *p -= lr * g / (*a + eps).sqrt();
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_weights, Activation, Dense, InitScheme, Layer};

    fn net() -> Network<f64> {
        let mut n = Network::new(vec![Layer::Dense(Dense::new(3, 2, Activation::Sigmoid).unwrap())]).unwrap();
        init_weights(&mut n, InitScheme::FanInUniform, 3);
        n
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut n = net();
        let before = n.clone();
        let mut opt = RmspropState::with_defaults(&n);
        let zeros: Vec<_> = n.params().into_iter().map(Params::zeros_like).collect();
        opt.step(&mut n, &zeros).unwrap();
        assert_eq!(n, before);
    }

    #[test]
    fn warm_constant_gradient_steps_by_learning_rate() {
        let mut n = net();
        let mut opt = RmspropState::with_defaults(&n);
        let mut g: Vec<_> = n.params().into_iter().map(Params::zeros_like).collect();
        g[0].w.fill(0.37);
        for _ in 0..300 {
            opt.step(&mut n, &g).unwrap();
        }
        // accumulator converges to g^2, so each step moves by lr g / |g| = lr
        let before = n.layers()[0].params().w[[0, 0]];
        opt.step(&mut n, &g).unwrap();
        let moved = before - n.layers()[0].params().w[[0, 0]];
        assert!((moved - 1e-3).abs() < 1e-9, "{moved}");
        assert!(opt.accumulators()[0].w.iter().all(|&a| a >= 0.0));
    }
}
