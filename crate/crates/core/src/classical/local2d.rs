//! Sliding-window linear detectors for the 2-D recording channel.
//!
//! Each symbol is estimated from the `(2R+1) x (2R+1)` window of receives
//! centered on it. Because the response is shift invariant, the interior
//! window model is the same everywhere and one linear filter serves every
//! position; near the edges the receive grid is zero padded.

use nalgebra::{DMatrix, DVector};

use super::{hard_decision, DetectError};
use crate::channel::TdmrChannel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LocalKind {
    /// Solves the square system over the symbols inside the window,
    /// ignoring interference from outside it.
    Ls,
    /// MMSE estimate over every symbol that reaches the window.
    Lmmse,
}

/// A position-invariant window filter.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDetector2d {
    radius: usize,
    filter: Vec<f64>,
}

/// Window-to-symbol response: entry `(w, s)` is the gain from symbol offset
/// `s` (over a square of the given side starting at `-lo`) to window sample `w`.
fn window_matrix(channel: &TdmrChannel, radius: usize, lo: isize, side: usize) -> DMatrix<f64> {
    let b = channel.isi_extent() as isize;
    let r = radius as isize;
    let wside = 2 * radius + 1;
    DMatrix::from_fn(wside * wside, side * side, |w, s| {
        let (i, j) = ((w / wside) as isize - r, (w % wside) as isize - r);
        let (p, q) = ((s / side) as isize - lo, (s % side) as isize - lo);
        let (a, c) = (i - p, j - q);
        if (0..=b).contains(&a) && (0..=b).contains(&c) {
            channel.tap(a as usize, c as usize)
        } else {
            0.0
        }
    })
}

/// Solves `a f = rhs`, falling back to the pseudo-inverse when `a` is singular.
fn solve_or_pinv(a: DMatrix<f64>, rhs: DVector<f64>) -> DVector<f64> {
    if let Some(f) = a.clone().lu().solve(&rhs) {
        if f.iter().all(|v| v.is_finite()) {
            return f;
        }
    }
    a.pseudo_inverse(1e-12).expect("nonnegative epsilon") * rhs
}

impl LocalDetector2d {
    pub fn new(channel: &TdmrChannel, sigma2: f64, kind: LocalKind, radius: usize) -> Result<Self, DetectError> {
        if !(sigma2 >= 0.0) {
            return Err(DetectError::InvalidNoiseVariance(sigma2));
        }
        let wside = 2 * radius + 1;
        let filter = match kind {
            LocalKind::Ls => {
                let g_in = window_matrix(channel, radius, radius as isize, wside);
                let center = (wside * wside) / 2;
                let mut e = DVector::zeros(wside * wside);
                e[center] = 1.0;
                solve_or_pinv(g_in.transpose(), e)
            }
            LocalKind::Lmmse => {
                let side = wside + channel.isi_extent();
                let lo = (radius + channel.isi_extent()) as isize;
                let g = window_matrix(channel, radius, lo, side);
                // symbol offset (0, 0)
                let center = (lo as usize) * side + lo as usize;
                let gram = &g * g.transpose() + DMatrix::identity(wside * wside, wside * wside) * sigma2;
                solve_or_pinv(gram, g.column(center).into_owned())
            }
        };
        Ok(Self { radius, filter: filter.iter().copied().collect() })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Row-major `(2R+1) x (2R+1)` filter taps.
    pub fn filter(&self) -> &[f64] {
        &self.filter
    }

    /// Linear estimates for a row-major `rows x cols` receive grid.
    pub fn soft(&self, rows: usize, cols: usize, y: &[f64]) -> Result<Vec<f64>, DetectError> {
        if y.len() != rows * cols {
            return Err(DetectError::DimensionMismatch { expected: rows * cols, found: y.len() });
        }
        let r = self.radius as isize;
        let wside = 2 * self.radius + 1;
        let mut out = vec![0.0; y.len()];
        for n in 0..rows as isize {
            for k in 0..cols as isize {
                let mut acc = 0.0;
                for i in -r..=r {
                    let row = n + i;
                    if row < 0 || row >= rows as isize {
                        continue;
                    }
                    for j in -r..=r {
                        let col = k + j;
                        if col < 0 || col >= cols as isize {
                            continue;
                        }
                        let w = (i + r) as usize * wside + (j + r) as usize;
                        acc += self.filter[w] * y[row as usize * cols + col as usize];
                    }
                }
                out[n as usize * cols + k as usize] = acc;
            }
        }
        Ok(out)
    }

    pub fn detect(&self, rows: usize, cols: usize, y: &[f64]) -> Result<Vec<i8>, DetectError> {
        Ok(self.soft(rows, cols, y)?.into_iter().map(hard_decision).collect())
    }
}

/// Hard decisions from a window of radius `B` around each symbol.
pub fn detect_local_2d(channel: &TdmrChannel, y: &[f64], sigma2: f64, kind: LocalKind) -> Result<Vec<i8>, DetectError> {
    LocalDetector2d::new(channel, sigma2, kind, channel.isi_extent())?.detect(channel.rows(), channel.cols(), y)
}
