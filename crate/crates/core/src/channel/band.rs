//! Compact band storage for banded and cyclically banded channel matrices.
//!
//! Row `k` of a channel with half-bandwidth `B` stores `2B + 1` coefficients.
//! Slot `j` of row `k` holds the entry in column `k - B + j`; for a cyclic
//! channel that column index is taken modulo `K`, for a plain banded channel
//! slots whose column falls off the matrix are structurally zero.

use num_complex::Complex64;
use rand::Rng;

use super::{complex_normal, ChannelError};

/// Common read access to band-stored `K x K` channel matrices.
pub trait BandMatrix {
    /// Number of rows (and columns), `K`.
    fn size(&self) -> usize;

    /// Half-bandwidth `B`.
    fn half_bandwidth(&self) -> usize;

    /// Row-major `K x (2B + 1)` band coefficients.
    fn band(&self) -> &[Complex64];

    /// Whether column indices wrap modulo `K`.
    fn is_cyclic(&self) -> bool;

    /// Number of band slots per row, `2B + 1`.
    fn width(&self) -> usize {
        2 * self.half_bandwidth() + 1
    }

    /// Column addressed by slot `j` of row `k`, or `None` if it lies off the matrix.
    fn column(&self, k: usize, j: usize) -> Option<usize> {
        let n = self.size() as isize;
        let col = k as isize - self.half_bandwidth() as isize + j as isize;
        if self.is_cyclic() {
            Some(col.rem_euclid(n) as usize)
        } else if (0..n).contains(&col) {
            Some(col as usize)
        } else {
            None
        }
    }

    /// Coefficient in band slot `j` of row `k`.
    fn coeff(&self, k: usize, j: usize) -> Complex64 {
        self.band()[k * self.width() + j]
    }

    /// Iterates the structurally nonzero `(column, value)` pairs of row `k`.
    fn row_entries(&self, k: usize) -> RowEntries<'_, Self>
    where
        Self: Sized,
    {
        RowEntries { matrix: self, row: k, slot: 0 }
    }

    /// `H x` for a complex vector, evaluated directly from the band.
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64>
    where
        Self: Sized,
    {
        assert_eq!(x.len(), self.size(), "vector length must match channel size");
        (0..self.size()).map(|k| self.row_entries(k).map(|(m, h)| h * x[m]).sum()).collect()
    }

    /// `H x` for a real (e.g. BPSK) vector.
    fn apply_real(&self, x: &[f64]) -> Vec<Complex64>
    where
        Self: Sized,
    {
        assert_eq!(x.len(), self.size(), "vector length must match channel size");
        (0..self.size()).map(|k| self.row_entries(k).map(|(m, h)| h * x[m]).sum()).collect()
    }

    /// `H^H u`.
    fn apply_adjoint(&self, u: &[Complex64]) -> Vec<Complex64>
    where
        Self: Sized,
    {
        assert_eq!(u.len(), self.size(), "vector length must match channel size");
        let mut out = vec![Complex64::new(0.0, 0.0); self.size()];
        for (k, &uk) in u.iter().enumerate() {
            for (m, h) in self.row_entries(k) {
                out[m] += h.conj() * uk;
            }
        }
        out
    }

    /// Dense row-major `K x K` reconstruction.
    fn to_dense(&self) -> Vec<Complex64>
    where
        Self: Sized,
    {
        let n = self.size();
        let mut dense = vec![Complex64::new(0.0, 0.0); n * n];
        for k in 0..n {
            for (m, h) in self.row_entries(k) {
                dense[k * n + m] += h;
            }
        }
        dense
    }
}

/// Iterator over the on-matrix band entries of one row.
pub struct RowEntries<'a, M> {
    matrix: &'a M,
    row: usize,
    slot: usize,
}

impl<M: BandMatrix> Iterator for RowEntries<'_, M> {
    type Item = (usize, Complex64);

    fn next(&mut self) -> Option<Self::Item> {
        while self.slot < self.matrix.width() {
            let j = self.slot;
            self.slot += 1;
            if let Some(m) = self.matrix.column(self.row, j) {
                return Some((m, self.matrix.coeff(self.row, j)));
            }
        }
        None
    }
}

/// A strictly banded channel: `H[k][m] = 0` whenever `|k - m| > B`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedChannel {
    size: usize,
    half_bandwidth: usize,
    band: Vec<Complex64>,
}

impl BandedChannel {
    /// Wraps band coefficients; off-matrix slots are forced to zero.
    pub fn new(size: usize, half_bandwidth: usize, band: Vec<Complex64>) -> Result<Self, ChannelError> {
        if size == 0 {
            return Err(ChannelError::InvalidDimensions("channel size must be at least 1".into()));
        }
        let width = 2 * half_bandwidth + 1;
        if band.len() != size * width {
            return Err(ChannelError::DimensionMismatch { expected: size * width, found: band.len() });
        }
        let mut channel = Self { size, half_bandwidth, band };
        for k in 0..size {
            for j in 0..width {
                if channel.column(k, j).is_none() {
                    channel.band[k * width + j] = Complex64::new(0.0, 0.0);
                }
            }
        }
        Ok(channel)
    }

    /// Builds a channel from `f(row, column)` evaluated on the band.
    pub fn from_fn(
        size: usize,
        half_bandwidth: usize,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Result<Self, ChannelError> {
        let width = 2 * half_bandwidth + 1;
        let mut band = vec![Complex64::new(0.0, 0.0); size * width];
        for k in 0..size {
            for j in 0..width {
                let col = k as isize - half_bandwidth as isize + j as isize;
                if (0..size as isize).contains(&col) {
                    band[k * width + j] = f(k, col as usize);
                }
            }
        }
        Self::new(size, half_bandwidth, band)
    }

    /// Mutable band access. Writes to off-matrix slots never reach `y`.
    pub fn band_mut(&mut self) -> &mut [Complex64] {
        &mut self.band
    }
}

impl BandMatrix for BandedChannel {
    fn size(&self) -> usize {
        self.size
    }
    fn half_bandwidth(&self) -> usize {
        self.half_bandwidth
    }
    fn band(&self) -> &[Complex64] {
        &self.band
    }
    fn is_cyclic(&self) -> bool {
        false
    }
}

/// A cyclically banded (near-banded) channel: `H[k][m] = 0` when `B < |k - m| < K - B`.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicBandedChannel {
    size: usize,
    half_bandwidth: usize,
    band: Vec<Complex64>,
}

impl CyclicBandedChannel {
    /// Wraps band coefficients. Requires `K > 2B + 1`, otherwise the wrapped band
    /// covers the whole matrix and the upper and lower corners collide.
    pub fn new(size: usize, half_bandwidth: usize, band: Vec<Complex64>) -> Result<Self, ChannelError> {
        if size <= 2 * half_bandwidth + 1 {
            return Err(ChannelError::BandOverlap { size, half_bandwidth });
        }
        let width = 2 * half_bandwidth + 1;
        if band.len() != size * width {
            return Err(ChannelError::DimensionMismatch { expected: size * width, found: band.len() });
        }
        Ok(Self { size, half_bandwidth, band })
    }

    /// Builds a channel from `f(row, column)` evaluated on the cyclic band.
    pub fn from_fn(
        size: usize,
        half_bandwidth: usize,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Result<Self, ChannelError> {
        if size <= 2 * half_bandwidth + 1 {
            return Err(ChannelError::BandOverlap { size, half_bandwidth });
        }
        let width = 2 * half_bandwidth + 1;
        let mut band = Vec::with_capacity(size * width);
        for k in 0..size {
            for j in 0..width {
                let col = (k as isize - half_bandwidth as isize + j as isize).rem_euclid(size as isize);
                band.push(f(k, col as usize));
            }
        }
        Self::new(size, half_bandwidth, band)
    }

    pub fn band_mut(&mut self) -> &mut [Complex64] {
        &mut self.band
    }

    /// Rotates the problem by `shift` positions: row `k` moves to row `k + shift (mod K)`.
    ///
    /// Because band slots are relative to the diagonal, rotating the rows of
    /// the band rotates both the rows and the columns of the dense matrix.
    pub fn rotated(&self, shift: usize) -> Self {
        let width = self.width();
        let n = self.size;
        let mut band = vec![Complex64::new(0.0, 0.0); self.band.len()];
        for k in 0..n {
            let dst = (k + shift) % n;
            band[dst * width..(dst + 1) * width].copy_from_slice(&self.band[k * width..(k + 1) * width]);
        }
        Self { size: n, half_bandwidth: self.half_bandwidth, band }
    }
}

impl BandMatrix for CyclicBandedChannel {
    fn size(&self) -> usize {
        self.size
    }
    fn half_bandwidth(&self) -> usize {
        self.half_bandwidth
    }
    fn band(&self) -> &[Complex64] {
        &self.band
    }
    fn is_cyclic(&self) -> bool {
        true
    }
}

/// Banded channel with i.i.d. `CN(0, 1)` coefficients on the band.
pub fn draw_banded_rayleigh<R: Rng + ?Sized>(
    size: usize,
    half_bandwidth: usize,
    rng: &mut R,
) -> Result<BandedChannel, ChannelError> {
    if size == 0 {
        return Err(ChannelError::InvalidDimensions("channel size must be at least 1".into()));
    }
    BandedChannel::from_fn(size, half_bandwidth, |_, _| complex_normal(rng))
}

/// Cyclically banded channel with i.i.d. `CN(0, 1)` coefficients on the wrapped band.
pub fn draw_near_banded_rayleigh<R: Rng + ?Sized>(
    size: usize,
    half_bandwidth: usize,
    rng: &mut R,
) -> Result<CyclicBandedChannel, ChannelError> {
    CyclicBandedChannel::from_fn(size, half_bandwidth, |_, _| complex_normal(rng))
}
