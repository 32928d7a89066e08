//! Minibatch RMSprop training with early stopping on validation loss.

use std::io::Write;
use std::time::Instant;

use banddet::channel::substream;
use banddet::detector::{stack_inputs, DetectorSpec, Dimensionality, NeuralDetector, PreprocessedInput};
use banddet::nn::{Network, Padding, Params, RmspropState, Scalar, Tensor};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::config::{ArchitectureChoice, Precision, TrainingConfig};
use crate::scenario::{training_sample, Split, SHUFFLE_STREAMS};
use crate::HarnessError;

/// Frames per forward pass during validation.
const VALIDATION_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    pub step: usize,
    /// Mean training loss since the previous row.
    pub train_loss: f64,
    pub validation_loss: f64,
    pub validation_ber: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Patience,
    MaxEpochs,
    TimeLimit,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Network with the lowest validation loss seen.
    pub detector: NeuralDetector<f64>,
    pub trace: Vec<TraceRow>,
    pub initial_validation_loss: f64,
    pub best_validation_loss: f64,
    pub steps: usize,
    pub stop: StopReason,
    pub seconds: f64,
}

impl TrainOutcome {
    pub fn write_trace<W: Write>(&self, w: W) -> Result<(), HarnessError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["epoch", "step", "train_loss", "validation_loss", "validation_ber", "seconds"])?;
        for r in &self.trace {
            out.write_record([
                r.epoch.to_string(),
                r.step.to_string(),
                format!("{:.8e}", r.train_loss),
                format!("{:.8e}", r.validation_loss),
                format!("{:.8e}", r.validation_ber),
                format!("{:.2}", r.seconds),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Untrained detector for a configuration.
pub fn initial_detector<S: Scalar>(cfg: &TrainingConfig) -> Result<NeuralDetector<S>, HarnessError> {
    let b = cfg.half_bandwidth;
    let init_seed = cfg.seed ^ 0x1a17_5eed;
    let det = match cfg.architecture {
        ArchitectureChoice::Mlp => NeuralDetector::fully_connected(cfg.k_train, b, &cfg.mlp_hidden, init_seed)?,
        arch => {
            let spec = DetectorSpec {
                half_bandwidth: b,
                depths: cfg.depths.clone(),
                padding: if arch == ArchitectureChoice::Ccnn { Padding::Cyclic } else { Padding::Zero },
                dimensionality: if arch == ArchitectureChoice::Cnn2d {
                    Dimensionality::TwoD
                } else {
                    Dimensionality::OneD
                },
            };
            NeuralDetector::convolutional(&spec, init_seed)?
        }
    };
    Ok(det)
}

pub fn train(cfg: &TrainingConfig) -> Result<TrainOutcome, HarnessError> {
    cfg.validate()?;
    match cfg.precision {
        Precision::F32 => train_with::<f32>(cfg),
        Precision::F64 => train_with::<f64>(cfg),
    }
}

struct Batch<S> {
    x: Tensor<S>,
    side: Option<Array2<S>>,
    targets: Vec<S>,
}

fn make_batch<S: Scalar>(inputs: &[PreprocessedInput], targets: &[Vec<f64>]) -> Result<Batch<S>, HarnessError> {
    let (x, side) = stack_inputs::<S>(inputs)?;
    let targets = targets.iter().flatten().map(|&t| S::from_f64(t)).collect();
    Ok(Batch { x, side, targets })
}

fn load_split<S: Scalar>(cfg: &TrainingConfig, split: Split, indices: &[u64]) -> Result<Batch<S>, HarnessError> {
    let mut inputs = Vec::with_capacity(indices.len());
    let mut targets = Vec::with_capacity(indices.len());
    for &i in indices {
        let s = training_sample(cfg, split, i)?;
        inputs.push(s.preprocess()?);
        targets.push(s.targets());
    }
    make_batch(&inputs, &targets)
}

type ShardGradient<S> = (Vec<Params<S>>, f64);

/// Summed squared error and parameter gradients of `sum (o - t)^2 / total`.
fn shard_gradient<S: Scalar>(
    net: &Network<S>,
    batch: &Batch<S>,
    total: usize,
) -> Result<ShardGradient<S>, HarnessError> {
    let cache = net.forward_train(&batch.x, batch.side.as_ref())?;
    let out = cache.output();
    let scale = S::from_f64(2.0 / total as f64);
    let mut sse = 0.0;
    let dout: Vec<S> = out
        .as_slice()
        .iter()
        .zip(&batch.targets)
        .map(|(&o, &t)| {
            let d = o - t;
            sse += d.into_f64() * d.into_f64();
            scale * d
        })
        .collect();
    let dout = Tensor::from_vec(out.shape(), dout)?;
    let back = net.backward(&cache, &dout, false)?;
    Ok((back.grads, sse))
}

/// Mean squared error and hard-decision error rate over validation batches.
fn validate<S: Scalar>(net: &Network<S>, batches: &[Batch<S>]) -> Result<(f64, f64), HarnessError> {
    let (mut sse, mut errors, mut n) = (0.0, 0usize, 0usize);
    for b in batches {
        let out = net.forward(&b.x, b.side.as_ref())?;
        for (&o, &t) in out.as_slice().iter().zip(&b.targets) {
            let (o, t) = (o.into_f64(), t.into_f64());
            sse += (o - t) * (o - t);
            errors += usize::from((o > 0.5) != (t > 0.5));
        }
        n += b.targets.len();
    }
    Ok((sse / n as f64, errors as f64 / n as f64))
}

fn train_with<S: Scalar>(cfg: &TrainingConfig) -> Result<TrainOutcome, HarnessError> {
    let start = Instant::now();
    let mut detector = initial_detector::<S>(cfg)?;
    let mut opt = RmspropState::new(&detector.network, cfg.learning_rate, cfg.rmsprop_decay, cfg.rmsprop_epsilon);

    let val_indices: Vec<u64> = (0..cfg.validation_samples as u64).collect();
    let val_batches = val_indices
        .chunks(VALIDATION_CHUNK)
        .map(|c| load_split::<S>(cfg, Split::Validation, c))
        .collect::<Result<Vec<_>, _>>()?;
    let (initial_loss, initial_ber) = validate(&detector.network, &val_batches)?;
    log::info!("{}: initial validation loss {initial_loss:.5}, error rate {initial_ber:.5}", cfg.name);

    let mut trace = vec![TraceRow {
        epoch: 0,
        step: 0,
        train_loss: f64::NAN,
        validation_loss: initial_loss,
        validation_ber: initial_ber,
        seconds: start.elapsed().as_secs_f64(),
    }];
    let mut best = (initial_loss, detector.network.clone());
    let mut stagnant = 0usize;
    let steps_per_epoch = cfg.samples.div_ceil(cfg.minibatch);
    let validate_every = steps_per_epoch.div_ceil(cfg.validations_per_epoch);
    let mut order: Vec<u64> = (0..cfg.samples as u64).collect();
    let mut step = 0usize;
    let (mut window_sse, mut window_values) = (0.0, 0usize);
    let mut stop = StopReason::MaxEpochs;

    'epochs: for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut substream(cfg.seed, SHUFFLE_STREAMS + epoch as u64));
        for (i, chunk) in order.chunks(cfg.minibatch).enumerate() {
            let total: usize = chunk.len() * detector_outputs_per_frame(cfg);
            let shard_len = chunk.len().div_ceil(cfg.workers);
            let shards: Vec<&[u64]> = chunk.chunks(shard_len).collect();
            let net = &detector.network;
            let results: Vec<Result<ShardGradient<S>, HarnessError>> = if shards.len() == 1 {
                vec![load_split(cfg, Split::Train, shards[0]).and_then(|b| shard_gradient(net, &b, total))]
            } else {
                shards
                    .par_iter()
                    .map(|s| load_split(cfg, Split::Train, s).and_then(|b| shard_gradient(net, &b, total)))
                    .collect()
            };
            let mut grads: Option<Vec<Params<S>>> = None;
            for r in results {
                let (g, sse) = r?;
                window_sse += sse;
                match &mut grads {
                    None => grads = Some(g),
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| a.add_assign(b)),
                }
            }
            window_values += total;
            step += 1;
            if !window_sse.is_finite() {
                return Err(HarnessError::Diverged { epoch, step, loss: window_sse / window_values as f64 });
            }
            opt.step(&mut detector.network, &grads.expect("minibatch is nonempty"))?;

            let out_of_time = cfg.max_train_seconds > 0.0 && start.elapsed().as_secs_f64() >= cfg.max_train_seconds;
            let last = i + 1 == steps_per_epoch;
            if (i + 1) % validate_every == 0 || last || out_of_time {
                let (loss, ber) = validate(&detector.network, &val_batches)?;
                if !loss.is_finite() {
                    return Err(HarnessError::Diverged { epoch, step, loss });
                }
                let row = TraceRow {
                    epoch,
                    step,
                    train_loss: window_sse / window_values as f64,
                    validation_loss: loss,
                    validation_ber: ber,
                    seconds: start.elapsed().as_secs_f64(),
                };
                log::info!(
                    "{}: epoch {epoch} step {step} train {:.5} validation {loss:.5} error rate {ber:.5} ({:.0} s)",
                    cfg.name,
                    row.train_loss,
                    row.seconds
                );
                trace.push(row);
                (window_sse, window_values) = (0.0, 0);
                if loss < best.0 {
                    best = (loss, detector.network.clone());
                    stagnant = 0;
                } else {
                    stagnant += 1;
                    if stagnant >= cfg.patience {
                        stop = StopReason::Patience;
                        break 'epochs;
                    }
                }
                if out_of_time {
                    stop = StopReason::TimeLimit;
                    break 'epochs;
                }
            }
        }
    }

    detector.network = best.1;
    Ok(TrainOutcome {
        detector: detector.cast(),
        trace,
        initial_validation_loss: initial_loss,
        best_validation_loss: best.0,
        steps: step,
        stop,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn detector_outputs_per_frame(cfg: &TrainingConfig) -> usize {
    match cfg.architecture {
        ArchitectureChoice::Cnn2d => cfg.grid_rows * cfg.k_train,
        _ => cfg.k_train,
    }
}
