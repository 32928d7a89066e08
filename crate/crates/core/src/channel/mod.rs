//! Channel realizations, noise and frame generation.
//!
//! Every generator takes an explicit random stream. Use [`substream`] to
//! derive independent, reproducible streams from a master seed.

mod band;
pub mod io;
mod noise;
mod ofdm;
mod tdmr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub use band::{
    draw_banded_rayleigh, draw_near_banded_rayleigh, BandMatrix, BandedChannel, CyclicBandedChannel, RowEntries,
};
pub use noise::{
    sample_training_snr, snr_to_sigma2, ChannelKind, NoiseKind, NoiseModel, MIXTURE_IMPULSE_PROB,
    MIXTURE_VARIANCE_FACTOR,
};
pub use ofdm::{
    doubly_selective_channel_from_taps, draw_doubly_selective_channel, draw_tap_processes, draw_underwater_channel,
    draw_underwater_paths, underwater_channel_from_paths, DoublySelectiveParams, UnderwaterParams, UnderwaterPath,
};
pub use tdmr::{draw_tdmr_channel, transmit_grid, GridFrame, TdmrChannel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cyclic band self-overlaps: K = {size} must exceed 2B + 1 = {}", 2 * half_bandwidth + 1)]
    BandOverlap { size: usize, half_bandwidth: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("symbols must be +1 or -1, found {0}")]
    InvalidSymbol(i8),
}

/// Deterministic stream `stream` of the master seed `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One draw from `CN(0, 1)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Uniform i.i.d. BPSK symbols.
pub fn random_symbols<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<i8> {
    (0..len).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect()
}

/// One transmission over a 1-D channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub x: Vec<i8>,
    pub y: Vec<Complex64>,
    pub snr_db: f64,
    pub sigma2: f64,
}

fn check_symbols(x: &[i8]) -> Result<(), ChannelError> {
    match x.iter().find(|&&s| s != 1 && s != -1) {
        Some(&s) => Err(ChannelError::InvalidSymbol(s)),
        None => Ok(()),
    }
}

/// Sends BPSK symbols `x` through a band-stored channel: `y_k = sum_b H[k][k+b] x[k+b] + n_k`.
pub fn transmit<C: BandMatrix, R: Rng + ?Sized>(
    channel: &C,
    x: &[i8],
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Frame, ChannelError> {
    if x.len() != channel.size() {
        return Err(ChannelError::DimensionMismatch { expected: channel.size(), found: x.len() });
    }
    check_symbols(x)?;
    let xf: Vec<f64> = x.iter().map(|&s| f64::from(s)).collect();
    let mut y = channel.apply_real(&xf);
    for yk in &mut y {
        *yk += noise.sample_complex(rng);
    }
    Ok(Frame { x: x.to_vec(), y, snr_db: noise.snr_db(), sigma2: noise.sigma2() })
}
