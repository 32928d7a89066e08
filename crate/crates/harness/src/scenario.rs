//! Channel scenarios and per-frame sample generation.

use banddet::channel::BandMatrix;
use banddet::channel::{
    draw_banded_rayleigh, draw_doubly_selective_channel, draw_near_banded_rayleigh, draw_tdmr_channel,
    draw_underwater_channel, random_symbols, sample_training_snr, snr_to_sigma2, substream, transmit, transmit_grid,
    BandedChannel, CyclicBandedChannel, DoublySelectiveParams, Frame, GridFrame, NoiseKind, NoiseModel, TdmrChannel,
    UnderwaterParams,
};
use banddet::detector::{preprocess, preprocess_grid, symbol_target, PreprocessedInput};
use rand::Rng;

use crate::config::{noise_kind, ChannelChoice, NoiseChoice, TrainingConfig};
use crate::HarnessError;

/// Stream offsets under a master seed; frame `i` of a split uses stream `base + i`.
pub const TRAIN_STREAMS: u64 = 0;
pub const VALIDATION_STREAMS: u64 = 1 << 40;
pub const SHUFFLE_STREAMS: u64 = 2 << 40;

/// A channel family at one size.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub channel: ChannelChoice,
    pub noise: NoiseChoice,
    /// Frame length `K` (grid columns for TDMR).
    pub size: usize,
    pub half_bandwidth: usize,
    pub grid_rows: usize,
    pub max_doppler: f64,
}

impl Scenario {
    pub fn banded(size: usize, half_bandwidth: usize) -> Self {
        Self {
            channel: ChannelChoice::BandedRayleigh,
            noise: NoiseChoice::Gaussian,
            size,
            half_bandwidth,
            grid_rows: 0,
            max_doppler: 0.0,
        }
    }

    pub fn from_config(cfg: &TrainingConfig) -> Self {
        Self {
            channel: cfg.channel,
            noise: cfg.noise,
            size: cfg.k_train,
            half_bandwidth: cfg.half_bandwidth,
            grid_rows: cfg.grid_rows,
            max_doppler: cfg.max_doppler,
        }
    }

    pub fn with_size(&self, size: usize) -> Self {
        Self { size, ..self.clone() }
    }

    pub fn noise_kind(&self) -> NoiseKind {
        noise_kind(self.channel, self.noise)
    }

    pub fn sigma2(&self, snr_db: f64) -> f64 {
        snr_to_sigma2(snr_db, self.half_bandwidth, self.noise_kind(), self.channel.kind())
    }

    /// Symbols per frame.
    pub fn bits_per_frame(&self) -> usize {
        match self.channel {
            ChannelChoice::Tdmr => self.grid_rows * self.size,
            _ => self.size,
        }
    }

    /// Draws a fresh channel, symbols and noise at `snr_db`.
    pub fn draw<R: Rng + ?Sized>(&self, snr_db: f64, rng: &mut R) -> Result<Sample, HarnessError> {
        let kind = self.noise_kind();
        let noise = NoiseModel::from_snr(kind, snr_db, self.channel.kind().reference_power(self.half_bandwidth));
        let (k, b) = (self.size, self.half_bandwidth);
        Ok(match self.channel {
            ChannelChoice::BandedRayleigh | ChannelChoice::Underwater => {
                let channel = if self.channel == ChannelChoice::Underwater {
                    let params = UnderwaterParams { subcarriers: k, half_bandwidth: b, ..UnderwaterParams::default() };
                    draw_underwater_channel(&params, rng)?
                } else {
                    draw_banded_rayleigh(k, b, rng)?
                };
                let x = random_symbols(k, rng);
                let frame = transmit(&channel, &x, &noise, rng)?;
                Sample::Banded { channel, frame }
            }
            ChannelChoice::NearBandedRayleigh | ChannelChoice::DoublySelective => {
                let channel = if self.channel == ChannelChoice::DoublySelective {
                    let params = DoublySelectiveParams::energy_preserving(k, self.max_doppler, b)?;
                    draw_doubly_selective_channel(&params, rng)?
                } else {
                    draw_near_banded_rayleigh(k, b, rng)?
                };
                let x = random_symbols(k, rng);
                let frame = transmit(&channel, &x, &noise, rng)?;
                Sample::Cyclic { channel, frame }
            }
            ChannelChoice::Tdmr => {
                let channel = draw_tdmr_channel(self.grid_rows, k, b, rng)?;
                let x = random_symbols(self.grid_rows * k, rng);
                let frame = transmit_grid(&channel, &x, &noise, rng)?;
                Sample::Grid { channel, frame }
            }
        })
    }
}

/// One transmitted frame together with its channel realization.
#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    Banded { channel: BandedChannel, frame: Frame },
    Cyclic { channel: CyclicBandedChannel, frame: Frame },
    Grid { channel: TdmrChannel, frame: GridFrame },
}

impl Sample {
    pub fn x(&self) -> &[i8] {
        match self {
            Sample::Banded { frame, .. } | Sample::Cyclic { frame, .. } => &frame.x,
            Sample::Grid { frame, .. } => &frame.x,
        }
    }

    pub fn sigma2(&self) -> f64 {
        match self {
            Sample::Banded { frame, .. } | Sample::Cyclic { frame, .. } => frame.sigma2,
            Sample::Grid { frame, .. } => frame.sigma2,
        }
    }

    pub fn preprocess(&self) -> Result<PreprocessedInput, HarnessError> {
        Ok(match self {
            Sample::Banded { channel, frame } => preprocess(channel, &frame.y)?,
            Sample::Cyclic { channel, frame } => preprocess(channel, &frame.y)?,
            Sample::Grid { channel, frame } => preprocess_grid(channel, &frame.y)?,
        })
    }

    pub fn targets(&self) -> Vec<f64> {
        self.x().iter().map(|&x| symbol_target(x)).collect()
    }

    /// Bytes that identify the frame, for paired-evaluation logs.
    pub fn digest_bytes(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.x().iter().map(|&x| x as u8).collect();
        let mut push = |v: f64| out.extend_from_slice(&v.to_le_bytes());
        match self {
            Sample::Banded { channel, frame } => {
                channel.band().iter().for_each(|h| {
                    push(h.re);
                    push(h.im)
                });
                frame.y.iter().for_each(|y| {
                    push(y.re);
                    push(y.im)
                });
            }
            Sample::Cyclic { channel, frame } => {
                channel.band().iter().for_each(|h| {
                    push(h.re);
                    push(h.im)
                });
                frame.y.iter().for_each(|y| {
                    push(y.re);
                    push(y.im)
                });
            }
            Sample::Grid { channel, frame } => {
                channel.taps().iter().copied().for_each(&mut push);
                frame.y.iter().copied().for_each(&mut push);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
}

/// Training example `index` of a split: fresh channel, symbols, SNR and
/// noise, all drawn from the example's own substream.
pub fn training_sample(cfg: &TrainingConfig, split: Split, index: u64) -> Result<Sample, HarnessError> {
    let base = match split {
        Split::Train => TRAIN_STREAMS,
        Split::Validation => VALIDATION_STREAMS,
    };
    let mut rng = substream(cfg.seed, base + index);
    let snr = sample_training_snr((cfg.snr_low_db, cfg.snr_high_db), &mut rng)?;
    Scenario::from_config(cfg).draw(snr, &mut rng)
}

/// Network inputs and targets `s = (x + 1) / 2` for a split, in index order.
pub fn generate_dataset(
    cfg: &TrainingConfig,
    split: Split,
) -> impl Iterator<Item = Result<(PreprocessedInput, Vec<f64>), HarnessError>> + '_ {
    let count = match split {
        Split::Train => cfg.samples,
        Split::Validation => cfg.validation_samples,
    };
    (0..count as u64).map(move |i| {
        let sample = training_sample(cfg, split, i)?;
        Ok((sample.preprocess()?, sample.targets()))
    })
}
