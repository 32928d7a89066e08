//! Exhaustive maximum-likelihood search over BPSK vectors.

use num_complex::Complex64;

use super::DetectError;
use crate::channel::BandMatrix;

/// Largest `K` accepted by [`detect_map_exhaustive`].
pub const MAX_MAP_SIZE: usize = 20;

struct Search<'a> {
    rows: Vec<Vec<(usize, Complex64)>>,
    // rows whose last column is assigned at depth d
    finished_at: Vec<Vec<usize>>,
    y: &'a [Complex64],
    current: Vec<i8>,
    best: Vec<i8>,
    best_metric: f64,
}

impl Search<'_> {
    fn row_metric(&self, k: usize) -> f64 {
        let mut r = self.y[k];
        for &(m, h) in &self.rows[k] {
            r -= h * f64::from(self.current[m]);
        }
        r.norm_sqr()
    }

    fn descend(&mut self, depth: usize, partial: f64) {
        if depth == self.current.len() {
            if partial < self.best_metric {
                self.best_metric = partial;
                self.best.copy_from_slice(&self.current);
            }
            return;
        }
        for s in [-1i8, 1] {
            self.current[depth] = s;
            let mut metric = partial;
            for i in 0..self.finished_at[depth].len() {
                metric += self.row_metric(self.finished_at[depth][i]);
            }
            // Later candidates only replace on a strict improvement, so equal
            // partial metrics can be pruned without changing the tie-break.
            if metric < self.best_metric {
                self.descend(depth + 1, metric);
            }
        }
    }
}

/// Minimizes `||y - H x||^2` over `x` in `{-1, +1}^K` by enumeration.
///
/// Candidates are visited in lexicographic order with `-1 < +1`; among equal
/// metrics the first visited wins. Partial sums over completed rows give
/// branch-and-bound pruning. Rejects `K > 20`.
pub fn detect_map_exhaustive<C: BandMatrix>(channel: &C, y: &[Complex64]) -> Result<Vec<i8>, DetectError> {
    let n = channel.size();
    if y.len() != n {
        return Err(DetectError::DimensionMismatch { expected: n, found: y.len() });
    }
    if n > MAX_MAP_SIZE {
        return Err(DetectError::TooLarge(n));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let rows: Vec<Vec<(usize, Complex64)>> = (0..n).map(|k| channel.row_entries(k).collect()).collect();
    let mut finished_at = vec![Vec::new(); n];
    for (k, row) in rows.iter().enumerate() {
        let last = row.iter().map(|&(m, _)| m).max().unwrap_or(0);
        finished_at[last].push(k);
    }
    let mut search =
        Search { rows, finished_at, y, current: vec![-1; n], best: vec![-1; n], best_metric: f64::INFINITY };
    search.descend(0, 0.0);
    Ok(search.best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_near_banded_rayleigh, random_symbols, substream, transmit, BandedChannel};
    use crate::channel::{NoiseKind, NoiseModel};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn brute_force<C: BandMatrix>(ch: &C, y: &[Complex64]) -> Vec<i8> {
        let n = ch.size();
        let mut best = (f64::INFINITY, Vec::new());
        for bits in 0..(1u32 << n) {
            // most significant bit is symbol 0, so counting order is lexicographic
            let x: Vec<f64> = (0..n).map(|i| if bits >> (n - 1 - i) & 1 == 1 { 1.0 } else { -1.0 }).collect();
            let hx = ch.apply_real(&x);
            let metric: f64 = hx.iter().zip(y).map(|(a, b)| (b - a).norm_sqr()).sum();
            if metric < best.0 {
                best = (metric, x.iter().map(|&v| v as i8).collect());
            }
        }
        best.1
    }

    #[test]
    fn ties_resolve_to_first_candidate() {
        let ch = BandedChannel::new(2, 0, vec![c(1.0); 2]).unwrap();
        assert_eq!(detect_map_exhaustive(&ch, &[c(0.0); 2]).unwrap(), vec![-1, -1]);
        let ch = BandedChannel::new(1, 0, vec![c(1.0)]).unwrap();
        assert_eq!(detect_map_exhaustive(&ch, &[c(0.2)]).unwrap(), vec![1]);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = substream(71, 0);
        let noise = NoiseModel::from_snr(NoiseKind::ComplexGaussian, 3.0, 3.0);
        for _ in 0..20 {
            let ch = draw_near_banded_rayleigh(8, 1, &mut rng).unwrap();
            let x = random_symbols(8, &mut rng);
            let f = transmit(&ch, &x, &noise, &mut rng).unwrap();
            assert_eq!(detect_map_exhaustive(&ch, &f.y).unwrap(), brute_force(&ch, &f.y));
        }
    }

    #[test]
    fn size_guard() {
        let ch = BandedChannel::new(21, 0, vec![c(1.0); 21]).unwrap();
        assert_eq!(detect_map_exhaustive(&ch, &[c(0.0); 21]), Err(DetectError::TooLarge(21)));
    }
}
