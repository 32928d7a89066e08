//! Two-dimensional ISI channel for magnetic recording grids.
//!
//! The received grid is the causal 2-D convolution of the symbol grid with a
//! `(B+1) x (B+1)` read-head response:
//! `y[n][k] = sum_{a,b <= B} h[a][b] x[n-a][k-b] + noise`, with off-grid
//! symbols equal to zero.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_symbols, ChannelError, NoiseModel};

#[derive(Debug, Clone, PartialEq)]
pub struct TdmrChannel {
    rows: usize,
    cols: usize,
    isi_extent: usize,
    taps: Vec<f64>,
}

impl TdmrChannel {
    /// `taps` is the row-major `(B+1) x (B+1)` response.
    pub fn new(rows: usize, cols: usize, isi_extent: usize, taps: Vec<f64>) -> Result<Self, ChannelError> {
        let side = isi_extent + 1;
        if taps.len() != side * side {
            return Err(ChannelError::DimensionMismatch { expected: side * side, found: taps.len() });
        }
        if rows < side || cols < side {
            return Err(ChannelError::InvalidDimensions(format!(
                "grid {rows}x{cols} smaller than the {side}x{side} response"
            )));
        }
        Ok(Self { rows, cols, isi_extent, taps })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// ISI extent `B` in each dimension.
    pub fn isi_extent(&self) -> usize {
        self.isi_extent
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn tap(&self, a: usize, b: usize) -> f64 {
        self.taps[a * (self.isi_extent + 1) + b]
    }

    /// Same response on a grid of different dimensions.
    pub fn resized(&self, rows: usize, cols: usize) -> Result<Self, ChannelError> {
        Self::new(rows, cols, self.isi_extent, self.taps.clone())
    }

    /// Noiseless response to a real symbol grid.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows * self.cols, "grid size mismatch");
        let side = self.isi_extent + 1;
        let mut y = vec![0.0; x.len()];
        for n in 0..self.rows {
            for k in 0..self.cols {
                let mut acc = 0.0;
                for a in 0..side.min(n + 1) {
                    for b in 0..side.min(k + 1) {
                        acc += self.taps[a * side + b] * x[(n - a) * self.cols + (k - b)];
                    }
                }
                y[n * self.cols + k] = acc;
            }
        }
        y
    }
}

/// Response with i.i.d. standard Gaussian taps.
pub fn draw_tdmr_channel<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    isi_extent: usize,
    rng: &mut R,
) -> Result<TdmrChannel, ChannelError> {
    let side = isi_extent + 1;
    let taps = (0..side * side).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    TdmrChannel::new(rows, cols, isi_extent, taps)
}

/// One transmission over a 2-D channel. Grids are row-major `rows x cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFrame {
    pub rows: usize,
    pub cols: usize,
    pub x: Vec<i8>,
    pub y: Vec<f64>,
    pub snr_db: f64,
    pub sigma2: f64,
}

pub fn transmit_grid<R: Rng + ?Sized>(
    channel: &TdmrChannel,
    x: &[i8],
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<GridFrame, ChannelError> {
    if x.len() != channel.rows * channel.cols {
        return Err(ChannelError::DimensionMismatch { expected: channel.rows * channel.cols, found: x.len() });
    }
    check_symbols(x)?;
    let xf: Vec<f64> = x.iter().map(|&s| f64::from(s)).collect();
    let mut y = channel.apply(&xf);
    for v in &mut y {
        *v += noise.sample_real(rng);
    }
    Ok(GridFrame {
        rows: channel.rows,
        cols: channel.cols,
        x: x.to_vec(),
        y,
        snr_db: noise.snr_db(),
        sigma2: noise.sigma2(),
    })
}
