//! Additive noise models and the SNR convention.
//!
//! SNR is the mean received signal power per sample at an interior position
//! divided by the mean noise power per sample. For the Gaussian-mixture model
//! the mean noise power is `(0.9 + 0.1 * 10) * sigma2 = 1.9 * sigma2`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{complex_normal, ChannelError};

/// Probability of drawing the high-variance mixture component.
pub const MIXTURE_IMPULSE_PROB: f64 = 0.1;
/// Variance of the high-variance mixture component relative to `sigma2`.
pub const MIXTURE_VARIANCE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    /// `CN(0, sigma2)`.
    ComplexGaussian,
    /// `0.9 CN(0, sigma2) + 0.1 CN(0, 10 sigma2)`.
    ComplexGaussianMixture,
    /// `N(0, sigma2)`, used by the 2-D recording channel.
    RealGaussian,
}

impl NoiseKind {
    /// Mean noise power per sample divided by `sigma2`.
    pub fn power_factor(self) -> f64 {
        match self {
            NoiseKind::ComplexGaussianMixture => {
                (1.0 - MIXTURE_IMPULSE_PROB) + MIXTURE_IMPULSE_PROB * MIXTURE_VARIANCE_FACTOR
            }
            _ => 1.0,
        }
    }
}

/// Families of channel realizations, used to fix the SNR reference power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    BandedRayleigh,
    NearBandedRayleigh,
    Underwater,
    DoublySelective,
    Tdmr,
}

impl ChannelKind {
    /// Analytic mean received-signal power at an interior position.
    pub fn reference_power(self, half_bandwidth: usize) -> f64 {
        match self {
            ChannelKind::BandedRayleigh | ChannelKind::NearBandedRayleigh => (2 * half_bandwidth + 1) as f64,
            ChannelKind::Tdmr => ((half_bandwidth + 1) * (half_bandwidth + 1)) as f64,
            // Both OFDM generators are normalized to unit total path energy.
            ChannelKind::Underwater | ChannelKind::DoublySelective => 1.0,
        }
    }
}

/// Base noise variance for a target SNR.
pub fn snr_to_sigma2(snr_db: f64, half_bandwidth: usize, noise: NoiseKind, channel: ChannelKind) -> f64 {
    channel.reference_power(half_bandwidth) / (10f64.powf(snr_db / 10.0) * noise.power_factor())
}

/// Draws a training SNR uniformly (in dB) from `[low, high]`.
pub fn sample_training_snr<R: Rng + ?Sized>(range_db: (f64, f64), rng: &mut R) -> Result<f64, ChannelError> {
    let (low, high) = range_db;
    if !(low.is_finite() && high.is_finite()) || low > high {
        return Err(ChannelError::InvalidParameter(format!("bad SNR range [{low}, {high}]")));
    }
    if low == high {
        return Ok(low);
    }
    Ok(rng.random_range(low..=high))
}

/// A configured noise source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
    sigma2: f64,
    reference_power: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, sigma2: f64, reference_power: f64) -> Result<Self, ChannelError> {
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(ChannelError::InvalidParameter(format!("noise variance {sigma2}")));
        }
        Ok(Self { kind, sigma2, reference_power })
    }

    /// Noise scaled so that `reference_power / noise_power` equals `snr_db`.
    pub fn from_snr(kind: NoiseKind, snr_db: f64, reference_power: f64) -> Self {
        let sigma2 = reference_power / (10f64.powf(snr_db / 10.0) * kind.power_factor());
        Self { kind, sigma2, reference_power }
    }

    pub fn noiseless() -> Self {
        Self { kind: NoiseKind::ComplexGaussian, sigma2: 0.0, reference_power: 1.0 }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Mean power per sample.
    pub fn power(&self) -> f64 {
        self.sigma2 * self.kind.power_factor()
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * (self.reference_power / self.power()).log10()
    }

    pub fn sample_complex<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        match self.kind {
            NoiseKind::ComplexGaussian => complex_normal(rng) * self.sigma2.sqrt(),
            NoiseKind::ComplexGaussianMixture => {
                let var = if rng.random_bool(MIXTURE_IMPULSE_PROB) {
                    self.sigma2 * MIXTURE_VARIANCE_FACTOR
                } else {
                    self.sigma2
                };
                complex_normal(rng) * var.sqrt()
            }
            NoiseKind::RealGaussian => Complex64::new(self.sample_real(rng), 0.0),
        }
    }

    pub fn sample_real<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            NoiseKind::RealGaussian => {
                let n: f64 = rng.sample(StandardNormal);
                n * self.sigma2.sqrt()
            }
            _ => self.sample_complex(rng).re,
        }
    }
}
