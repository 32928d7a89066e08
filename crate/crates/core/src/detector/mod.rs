//! Convolutional detectors: preprocessing, network assembly and
//! postprocessing.
//!
//! A 1-D detector turns row `k` of the band and the receive `y_k` into one
//! input block, runs a stack of block convolutions whose windows span
//! `2B + 1` blocks, and thresholds the per-position sigmoid output. Because
//! every layer shares its filter across positions, one set of weights serves
//! any system size.

mod checkpoint;
mod preprocess;

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{BandMatrix, ChannelError, TdmrChannel};
use crate::nn::{
    init_weights, Activation, BlockConv1d, CheckpointError, Conv2d, Dense, InitScheme, Layer, Network, NnError,
    Padding, Scalar,
};

pub use checkpoint::{load_detector, save_detector, DETECTOR_MAGIC, DETECTOR_VERSION};
pub use preprocess::{
    preprocess, preprocess_banded, preprocess_cyclic, preprocess_grid, stack_inputs, PreprocessedInput,
    PREPROCESS_VERSION,
};

/// Hidden-layer depths of the reference detector.
pub const DEFAULT_DEPTHS: [usize; 3] = [160, 80, 40];
/// Hidden widths of the fully connected comparison network.
pub const DEFAULT_MLP_HIDDEN: [usize; 3] = [3200, 1600, 800];

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("input has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid detector: {0}")]
    InvalidSpec(String),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("batch mixes inputs of different kinds or shapes")]
    MixedBatch,
    #[error("a {detector:?} detector cannot process {input:?} input")]
    WrongDimensionality { detector: Dimensionality, input: Dimensionality },
    #[error(transparent)]
    Network(#[from] NnError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dimensionality {
    OneD,
    TwoD,
}

/// Network family behind a detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Architecture {
    Convolutional,
    /// Fully connected; tied to the system size it was built for.
    FullyConnected,
}

/// Hyperparameters of a convolutional detector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectorSpec {
    pub half_bandwidth: usize,
    pub depths: Vec<usize>,
    pub padding: Padding,
    pub dimensionality: Dimensionality,
}

impl DetectorSpec {
    /// Zero-padded 1-D detector with the default depths.
    pub fn banded(half_bandwidth: usize) -> Self {
        Self {
            half_bandwidth,
            depths: DEFAULT_DEPTHS.to_vec(),
            padding: Padding::Zero,
            dimensionality: Dimensionality::OneD,
        }
    }

    /// 1-D detector whose windows wrap around the ends.
    pub fn cyclic(half_bandwidth: usize) -> Self {
        Self { padding: Padding::Cyclic, ..Self::banded(half_bandwidth) }
    }

    /// 2-D detector for grid channels with ISI extent `B`.
    pub fn grid(half_bandwidth: usize) -> Self {
        Self { dimensionality: Dimensionality::TwoD, ..Self::banded(half_bandwidth) }
    }
}

/// Builds an untrained (zero-weight) detector network.
///
/// Hidden layers use ReLU, the output layer is a depth-1 convolution over the
/// same window followed by a sigmoid.
pub fn build_detector<S: Scalar>(spec: &DetectorSpec) -> Result<Network<S>, DetectorError> {
    if spec.depths.is_empty() || spec.depths.contains(&0) {
        return Err(DetectorError::InvalidSpec("depths must be a nonempty list of positive sizes".into()));
    }
    let b = spec.half_bandwidth;
    let mut layers = Vec::with_capacity(spec.depths.len() + 1);
    match spec.dimensionality {
        Dimensionality::OneD => {
            let window = 2 * b + 1;
            let mut input = PreprocessedInput::block_len(b);
            for &d in &spec.depths {
                layers.push(Layer::Conv1d(BlockConv1d::new(input, window, d, spec.padding, Activation::Relu)?));
                input = d;
            }
            layers.push(Layer::Conv1d(BlockConv1d::new(input, window, 1, spec.padding, Activation::Sigmoid)?));
        }
        Dimensionality::TwoD => {
            if spec.padding != Padding::Zero {
                return Err(DetectorError::InvalidSpec("2-D detectors use zero padding".into()));
            }
            let taps = (b + 1) * (b + 1);
            let mut input = 1;
            for (i, &d) in spec.depths.iter().enumerate() {
                let side = (i == 0).then_some(taps);
                layers.push(Layer::Conv2d(Conv2d::new(input, b, d, side, Activation::Relu)?));
                input = d;
            }
            layers.push(Layer::Conv2d(Conv2d::new(input, b, 1, None, Activation::Sigmoid)?));
        }
    }
    Ok(Network::new(layers)?)
}

/// Fully connected network over the whole preprocessed frame of size `K`.
pub fn build_mlp_baseline<S: Scalar>(
    size: usize,
    half_bandwidth: usize,
    hidden: &[usize],
) -> Result<Network<S>, DetectorError> {
    if size == 0 || hidden.is_empty() || hidden.contains(&0) {
        return Err(DetectorError::InvalidSpec("MLP needs K >= 1 and positive hidden widths".into()));
    }
    let mut layers = Vec::with_capacity(hidden.len() + 1);
    let mut input = size * PreprocessedInput::block_len(half_bandwidth);
    for &h in hidden {
        layers.push(Layer::Dense(Dense::new(input, h, Activation::Relu)?));
        input = h;
    }
    layers.push(Layer::Dense(Dense::new(input, size, Activation::Sigmoid)?));
    Ok(Network::new(layers)?)
}

/// `x = 2 * 1(s > 0.5) - 1`.
pub fn postprocess(soft: &[f64]) -> Vec<i8> {
    soft.iter().map(|&s| if s > 0.5 { 1 } else { -1 }).collect()
}

/// Training target for a symbol: `s = (x + 1) / 2`.
pub fn symbol_target(x: i8) -> f64 {
    if x > 0 {
        1.0
    } else {
        0.0
    }
}

/// A network together with the metadata needed to feed it.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralDetector<S> {
    pub half_bandwidth: usize,
    pub dimensionality: Dimensionality,
    pub architecture: Architecture,
    pub network: Network<S>,
}

impl<S: Scalar> NeuralDetector<S> {
    /// Untrained convolutional detector with fan-in scaled random weights.
    pub fn convolutional(spec: &DetectorSpec, seed: u64) -> Result<Self, DetectorError> {
        let mut network = build_detector(spec)?;
        init_weights(&mut network, InitScheme::FanInUniform, seed);
        Ok(Self {
            half_bandwidth: spec.half_bandwidth,
            dimensionality: spec.dimensionality,
            architecture: Architecture::Convolutional,
            network,
        })
    }

    pub fn fully_connected(
        size: usize,
        half_bandwidth: usize,
        hidden: &[usize],
        seed: u64,
    ) -> Result<Self, DetectorError> {
        let mut network = build_mlp_baseline(size, half_bandwidth, hidden)?;
        init_weights(&mut network, InitScheme::FanInUniform, seed);
        Ok(Self {
            half_bandwidth,
            dimensionality: Dimensionality::OneD,
            architecture: Architecture::FullyConnected,
            network,
        })
    }

    /// Padding of the convolution layers (zero for fully connected networks).
    pub fn padding(&self) -> Padding {
        match self.network.layers().first() {
            Some(Layer::Conv1d(l)) => l.padding,
            _ => Padding::Zero,
        }
    }

    pub fn cast<T: Scalar>(&self) -> NeuralDetector<T> {
        NeuralDetector {
            half_bandwidth: self.half_bandwidth,
            dimensionality: self.dimensionality,
            architecture: self.architecture,
            network: self.network.cast(),
        }
    }

    fn check_input(&self, input: &PreprocessedInput) -> Result<(), DetectorError> {
        let (dim, b) = match input {
            PreprocessedInput::Blocks { half_bandwidth, .. } => (Dimensionality::OneD, *half_bandwidth),
            PreprocessedInput::Grid { taps, .. } => {
                (Dimensionality::TwoD, (taps.len() as f64).sqrt().round() as usize - 1)
            }
        };
        if dim != self.dimensionality {
            return Err(DetectorError::WrongDimensionality { detector: self.dimensionality, input: dim });
        }
        if b != self.half_bandwidth {
            return Err(DetectorError::InvalidSpec(format!(
                "detector built for B = {}, input has B = {b}",
                self.half_bandwidth
            )));
        }
        Ok(())
    }

    /// Sigmoid outputs for a batch of same-shaped inputs, frame after frame.
    pub fn soft_batch(&self, inputs: &[PreprocessedInput]) -> Result<Vec<f64>, DetectorError> {
        for input in inputs {
            self.check_input(input)?;
        }
        let (x, side) = stack_inputs::<S>(inputs)?;
        let out = self.network.forward(&x, side.as_ref())?;
        Ok(out.as_slice().iter().map(|v| v.into_f64()).collect())
    }

    pub fn soft_input(&self, input: &PreprocessedInput) -> Result<Vec<f64>, DetectorError> {
        self.soft_batch(std::slice::from_ref(input))
    }

    /// Sigmoid outputs for one 1-D frame; preprocessing follows the channel type.
    pub fn soft<C: BandMatrix>(&self, channel: &C, y: &[Complex64]) -> Result<Vec<f64>, DetectorError> {
        self.soft_input(&preprocess(channel, y)?)
    }

    pub fn detect<C: BandMatrix>(&self, channel: &C, y: &[Complex64]) -> Result<Vec<i8>, DetectorError> {
        Ok(postprocess(&self.soft(channel, y)?))
    }

    pub fn detect_grid(&self, channel: &TdmrChannel, y: &[f64]) -> Result<Vec<i8>, DetectorError> {
        Ok(postprocess(&self.soft_input(&preprocess_grid(channel, y)?)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{
        draw_banded_rayleigh, draw_near_banded_rayleigh, draw_tdmr_channel, random_symbols, substream, transmit,
        transmit_grid, NoiseKind, NoiseModel,
    };

    #[test]
    fn reference_parameter_count() {
        let net = build_detector::<f64>(&DetectorSpec::banded(1)).unwrap();
        let by_formula = (160 * 3 * 8 + 160) + (80 * 3 * 160 + 80) + (40 * 3 * 80 + 40) + (3 * 40 + 1);
        assert_eq!(net.num_params(), by_formula);
        assert_eq!(net.num_params(), 52241);
        assert!(
            matches!(net.layers().last(), Some(Layer::Conv1d(l)) if l.out_depth == 1 && l.activation == Activation::Sigmoid)
        );
    }

    #[test]
    fn spec_validation_and_widths() {
        let empty = DetectorSpec { depths: vec![], ..DetectorSpec::banded(1) };
        assert!(build_detector::<f64>(&empty).is_err());
        let net = build_detector::<f64>(&DetectorSpec::banded(2)).unwrap();
        assert_eq!(net.layers()[0].params().w.ncols(), 60);
        let grid = build_detector::<f64>(&DetectorSpec::grid(1)).unwrap();
        assert_eq!(grid.layers()[0].params().v.as_ref().unwrap().ncols(), 4);
        assert!(grid.layers()[1].params().v.is_none());
    }

    #[test]
    fn mlp_shapes() {
        let net = build_mlp_baseline::<f64>(20, 1, &DEFAULT_MLP_HIDDEN).unwrap();
        assert_eq!(net.layers()[0].params().w.ncols(), 160);
        assert_eq!(net.layers().last().unwrap().out_channels(), 20);
        let tiny = NeuralDetector::<f64>::fully_connected(4, 1, &[1], 0).unwrap();
        let mut rng = substream(121, 0);
        let ch = draw_banded_rayleigh(4, 1, &mut rng).unwrap();
        assert_eq!(tiny.detect(&ch, &[Complex64::new(0.0, 0.0); 4]).unwrap().len(), 4);
        let other = draw_banded_rayleigh(5, 1, &mut rng).unwrap();
        assert!(tiny.detect(&other, &[Complex64::new(0.0, 0.0); 5]).is_err());
    }

    #[test]
    fn postprocess_threshold() {
        assert_eq!(postprocess(&[0.9, 0.5, 0.1, 0.5000001]), vec![1, -1, -1, 1]);
        for x in [-1i8, 1] {
            assert_eq!(postprocess(&[symbol_target(x)]), vec![x]);
        }
    }

    #[test]
    fn untrained_zero_network_says_minus_one() {
        let det = NeuralDetector::<f64> {
            half_bandwidth: 1,
            dimensionality: Dimensionality::OneD,
            architecture: Architecture::Convolutional,
            network: build_detector(&DetectorSpec::banded(1)).unwrap(),
        };
        let mut rng = substream(122, 0);
        let ch = draw_banded_rayleigh(6, 1, &mut rng).unwrap();
        let y: Vec<Complex64> = (0..6).map(|_| crate::channel::complex_normal(&mut rng)).collect();
        assert!(det.soft(&ch, &y).unwrap().iter().all(|&s| s == 0.5));
        assert_eq!(det.detect(&ch, &y).unwrap(), vec![-1; 6]);
    }

    #[test]
    fn same_weights_run_at_any_size() {
        let det = NeuralDetector::<f64>::convolutional(&DetectorSpec::banded(1), 3).unwrap();
        let mut rng = substream(123, 0);
        for k in [1, 20, 100] {
            let ch = draw_banded_rayleigh(k, 1, &mut rng).unwrap();
            let x = random_symbols(k, &mut rng);
            let f = transmit(&ch, &x, &NoiseModel::from_snr(NoiseKind::ComplexGaussian, 13.0, 3.0), &mut rng).unwrap();
            let soft = det.soft(&ch, &f.y).unwrap();
            assert_eq!(soft.len(), k);
            assert!(soft.iter().all(|&s| s > 0.0 && s < 1.0));
        }
    }

    #[test]
    fn outputs_depend_only_on_nearby_blocks() {
        let spec = DetectorSpec::banded(1);
        let det = NeuralDetector::<f64>::convolutional(&spec, 4).unwrap();
        let reach = (spec.depths.len() + 1) * spec.half_bandwidth;
        let mut rng = substream(124, 0);
        let ch = draw_banded_rayleigh(30, 1, &mut rng).unwrap();
        let y: Vec<Complex64> = (0..30).map(|_| crate::channel::complex_normal(&mut rng)).collect();
        let base = det.soft(&ch, &y).unwrap();
        let mut y2 = y.clone();
        y2[0] += Complex64::new(3.0, -2.0);
        let moved = det.soft(&ch, &y2).unwrap();
        for k in 0..30 {
            if k > reach {
                assert_eq!(moved[k].to_bits(), base[k].to_bits(), "position {k}");
            }
        }
        assert_ne!(moved[0], base[0]);
    }

    #[test]
    fn cyclic_detector_is_rotation_equivariant() {
        let det = NeuralDetector::<f64>::convolutional(&DetectorSpec::cyclic(1), 5).unwrap();
        let mut rng = substream(125, 0);
        let ch = draw_near_banded_rayleigh(9, 1, &mut rng).unwrap();
        let y: Vec<Complex64> = (0..9).map(|_| crate::channel::complex_normal(&mut rng)).collect();
        let base = det.soft(&ch, &y).unwrap();
        for t in 1..9 {
            let mut y_rot = vec![Complex64::new(0.0, 0.0); 9];
            for k in 0..9 {
                y_rot[(k + t) % 9] = y[k];
            }
            let out = det.soft(&ch.rotated(t), &y_rot).unwrap();
            for k in 0..9 {
                assert_eq!(out[(k + t) % 9].to_bits(), base[k].to_bits());
            }
        }
    }

    #[test]
    fn grid_detector_runs() {
        let det = NeuralDetector::<f64>::convolutional(&DetectorSpec::grid(1), 6).unwrap();
        let mut rng = substream(126, 0);
        let ch = draw_tdmr_channel(5, 7, 1, &mut rng).unwrap();
        let x = random_symbols(35, &mut rng);
        let f = transmit_grid(&ch, &x, &NoiseModel::from_snr(NoiseKind::RealGaussian, 10.0, 4.0), &mut rng).unwrap();
        assert_eq!(det.detect_grid(&ch, &f.y).unwrap().len(), 35);
        assert!(matches!(
            det.detect(&draw_banded_rayleigh(4, 1, &mut rng).unwrap(), &[Complex64::new(0.0, 0.0); 4]),
            Err(DetectorError::WrongDimensionality { .. })
        ));
    }
}
