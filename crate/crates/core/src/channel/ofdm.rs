//! Frequency-domain channel matrices of two OFDM systems.
//!
//! * Underwater acoustic multipath with per-path Doppler scaling. Each path
//!   contributes `A_p / (1 + a_p) * exp(-j 2 pi f_k tau_p') * rho_p[k][m]`
//!   where `rho = sinc(pi beta T) exp(j pi beta T)` and
//!   `beta = (m - k) / T + a_p f_k / (1 + a_p)`.
//! * Doubly selective WSSUS multipath observed through a length-`K` FFT:
//!   `H[k][m] = 1/K sum_n sum_l h[n][l] exp(-j 2 pi (l m + (k - m) n) / K)`.
//!
//! Both are truncated to a band of half-width `B` (cyclic for the second).

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use super::{complex_normal, BandedChannel, ChannelError, CyclicBandedChannel};

const JAKES_SINUSOIDS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct UnderwaterParams {
    /// Number of discrete paths `N_p`.
    pub paths: usize,
    /// OFDM symbol duration `T` in seconds; subcarrier spacing is `1 / T`.
    pub symbol_duration: f64,
    /// Carrier frequency in Hz.
    pub carrier_hz: f64,
    /// Number of subcarriers `K`.
    pub subcarriers: usize,
    /// Standard deviation of the per-path radial velocity in m/s.
    pub velocity_std: f64,
    /// Sound speed in m/s.
    pub sound_speed: f64,
    /// Band truncation half-width `B`.
    pub half_bandwidth: usize,
}

impl Default for UnderwaterParams {
    fn default() -> Self {
        Self {
            paths: 15,
            symbol_duration: 104.86e-3,
            carrier_hz: 13e3,
            subcarriers: 1024,
            velocity_std: 0.3,
            sound_speed: 1500.0,
            half_bandwidth: 1,
        }
    }
}

impl UnderwaterParams {
    fn validate(&self) -> Result<(), ChannelError> {
        let positive = [self.symbol_duration, self.carrier_hz, self.velocity_std, self.sound_speed];
        if self.paths == 0 || self.subcarriers == 0 || positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(ChannelError::InvalidParameter(format!("{self:?}")));
        }
        Ok(())
    }

    /// Frequency of storage row `i`; rows map to subcarriers `-K/2 .. K/2 - 1`.
    pub fn subcarrier_hz(&self, i: usize) -> f64 {
        let k = i as f64 - (self.subcarriers / 2) as f64;
        self.carrier_hz + k / self.symbol_duration
    }
}

/// Amplitude, delay (s) and Doppler rate of one acoustic path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnderwaterPath {
    pub amplitude: f64,
    pub delay: f64,
    pub doppler_rate: f64,
}

/// Draws path parameters.
///
/// Delays are uniform on `[0, T/8]`. Amplitudes are Rayleigh with an
/// exponential power-delay profile (decay constant `T/16`) normalized to unit
/// total mean power. Doppler rates are `v / c` with `v` zero-mean uniform of
/// standard deviation `velocity_std`.
pub fn draw_underwater_paths<R: Rng + ?Sized>(
    params: &UnderwaterParams,
    rng: &mut R,
) -> Result<Vec<UnderwaterPath>, ChannelError> {
    params.validate()?;
    let t = params.symbol_duration;
    let delays: Vec<f64> = (0..params.paths).map(|_| rng.random_range(0.0..=t / 8.0)).collect();
    let profile: Vec<f64> = delays.iter().map(|d| (-d / (t / 16.0)).exp()).collect();
    let total: f64 = profile.iter().sum();
    let half_width = 3f64.sqrt() * params.velocity_std;
    Ok(delays
        .iter()
        .zip(&profile)
        .map(|(&delay, &p)| {
            let fading = complex_normal(rng).norm();
            let velocity = rng.random_range(-half_width..=half_width);
            UnderwaterPath {
                amplitude: (p / total).sqrt() * fading,
                delay,
                doppler_rate: velocity / params.sound_speed,
            }
        })
        .collect())
}

fn sinc_pi(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Band-truncated frequency-domain matrix for explicit paths.
pub fn underwater_channel_from_paths(
    params: &UnderwaterParams,
    paths: &[UnderwaterPath],
) -> Result<BandedChannel, ChannelError> {
    params.validate()?;
    let t = params.symbol_duration;
    BandedChannel::from_fn(params.subcarriers, params.half_bandwidth, |k, m| {
        let fk = params.subcarrier_hz(k);
        paths
            .iter()
            .map(|p| {
                let scale = 1.0 + p.doppler_rate;
                let delay = p.delay / scale;
                let beta_t = (m as f64 - k as f64) + p.doppler_rate * fk * t / scale;
                let rho = Complex64::from_polar(sinc_pi(beta_t), PI * beta_t);
                Complex64::from_polar(p.amplitude / scale, -2.0 * PI * fk * delay) * rho
            })
            .sum()
    })
}

pub fn draw_underwater_channel<R: Rng + ?Sized>(
    params: &UnderwaterParams,
    rng: &mut R,
) -> Result<BandedChannel, ChannelError> {
    let paths = draw_underwater_paths(params, rng)?;
    underwater_channel_from_paths(params, &paths)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoublySelectiveParams {
    /// Number of subcarriers `K`.
    pub subcarriers: usize,
    /// Maximum Doppler frequency normalized to the signaling rate.
    pub max_doppler: f64,
    /// Number of delay taps `N_h`.
    pub taps: usize,
    /// Variance of each tap.
    pub tap_variance: f64,
    /// Band truncation half-width `B`.
    pub half_bandwidth: usize,
}

impl DoublySelectiveParams {
    /// Energy-preserving configuration with `N_h = K / 4` taps of variance `1 / N_h`.
    pub fn energy_preserving(
        subcarriers: usize,
        max_doppler: f64,
        half_bandwidth: usize,
    ) -> Result<Self, ChannelError> {
        if subcarriers == 0 || !subcarriers.is_multiple_of(4) {
            return Err(ChannelError::InvalidParameter(format!(
                "K = {subcarriers} must be a positive multiple of 4 for N_h = K/4"
            )));
        }
        let taps = subcarriers / 4;
        Ok(Self { subcarriers, max_doppler, taps, tap_variance: 1.0 / taps as f64, half_bandwidth })
    }
}

/// Time-varying tap gains `h[l][n]`, `l < N_h`, `n < K`, from a sum-of-sinusoids
/// Jakes simulator with random arrival angles and phases.
pub fn draw_tap_processes<R: Rng + ?Sized>(
    params: &DoublySelectiveParams,
    rng: &mut R,
) -> Result<Vec<Vec<Complex64>>, ChannelError> {
    if params.taps == 0 || params.subcarriers == 0 || !(params.max_doppler >= 0.0) || !(params.tap_variance >= 0.0) {
        return Err(ChannelError::InvalidParameter(format!("{params:?}")));
    }
    let m = JAKES_SINUSOIDS as f64;
    let gain = (params.tap_variance / m).sqrt();
    Ok((0..params.taps)
        .map(|_| {
            let theta = rng.random_range(-PI..PI);
            let sinusoids: Vec<(f64, f64)> = (1..=JAKES_SINUSOIDS)
                .map(|i| {
                    let angle = (2.0 * PI * i as f64 - PI + theta) / m;
                    (2.0 * PI * params.max_doppler * angle.cos(), rng.random_range(-PI..PI))
                })
                .collect();
            (0..params.subcarriers)
                .map(|n| sinusoids.iter().map(|&(w, phi)| Complex64::from_polar(gain, w * n as f64 + phi)).sum())
                .collect()
        })
        .collect())
}

/// Cyclic band of the frequency-domain matrix induced by tap processes `taps[l][n]`.
pub fn doubly_selective_channel_from_taps(
    subcarriers: usize,
    half_bandwidth: usize,
    taps: &[Vec<Complex64>],
) -> Result<CyclicBandedChannel, ChannelError> {
    let k_len = subcarriers;
    if let Some(bad) = taps.iter().find(|t| t.len() != k_len) {
        return Err(ChannelError::DimensionMismatch { expected: k_len, found: bad.len() });
    }
    let b = half_bandwidth as isize;
    let w = |p: isize| Complex64::from_polar(1.0, -2.0 * PI * p.rem_euclid(k_len as isize) as f64 / k_len as f64);
    // spectra[l][d + B] = sum_n h[l][n] e^{-j 2 pi d n / K}
    let spectra: Vec<Vec<Complex64>> = taps
        .iter()
        .map(|h| (-b..=b).map(|d| h.iter().enumerate().map(|(n, &hn)| hn * w(d * n as isize)).sum()).collect())
        .collect();
    CyclicBandedChannel::from_fn(k_len, half_bandwidth, |k, m| {
        let mut d = k as isize - m as isize;
        if d > b {
            d -= k_len as isize;
        } else if d < -b {
            d += k_len as isize;
        }
        let sum: Complex64 =
            spectra.iter().enumerate().map(|(l, s)| s[(d + b) as usize] * w(l as isize * m as isize)).sum();
        sum / k_len as f64
    })
}

pub fn draw_doubly_selective_channel<R: Rng + ?Sized>(
    params: &DoublySelectiveParams,
    rng: &mut R,
) -> Result<CyclicBandedChannel, ChannelError> {
    let taps = draw_tap_processes(params, rng)?;
    doubly_selective_channel_from_taps(params.subcarriers, params.half_bandwidth, &taps)
}
