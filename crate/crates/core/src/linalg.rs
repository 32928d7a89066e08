//! Envelope (skyline) LDL^H factorization of Hermitian positive-definite
//! matrices.
//!
//! Row `i` of the lower triangle is stored from its first structural nonzero
//! column up to the diagonal. The envelope is closed under the factorization,
//! so a matrix with half-bandwidth `p` factors in `O(K p^2)`. A cyclically
//! banded matrix has an envelope equal to its band plus `p` full bottom rows,
//! and still factors in `O(K p^2)` because each entry of a full row only
//! overlaps the short rows above it over `p` columns.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactorError {
    #[error("matrix is singular or not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("right-hand side has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Lower triangle of a Hermitian matrix in envelope storage.
#[derive(Debug, Clone)]
pub struct EnvelopeMatrix {
    first: Vec<usize>,
    offset: Vec<usize>,
    values: Vec<Complex64>,
}

impl EnvelopeMatrix {
    /// Zero matrix whose row `i` spans columns `first[i]..=i`.
    pub fn zeros(first: Vec<usize>) -> Self {
        let mut offset = Vec::with_capacity(first.len() + 1);
        let mut total = 0;
        for (i, &f) in first.iter().enumerate() {
            assert!(f <= i, "envelope start must not exceed the diagonal");
            offset.push(total);
            total += i - f + 1;
        }
        offset.push(total);
        Self { first, offset, values: vec![Complex64::new(0.0, 0.0); total] }
    }

    pub fn size(&self) -> usize {
        self.first.len()
    }

    pub fn first(&self, i: usize) -> usize {
        self.first[i]
    }

    /// Entry `(i, j)` for `first(i) <= j <= i`.
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[self.offset[i] + j - self.first[i]]
    }

    /// Adds to entry `(i, j)`; panics if it lies outside the envelope.
    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(j <= i && j >= self.first[i], "({i}, {j}) outside envelope");
        self.values[self.offset[i] + j - self.first[i]] += v;
    }

    fn row(&self, i: usize) -> &[Complex64] {
        &self.values[self.offset[i]..self.offset[i + 1]]
    }

    /// Computes `L D L^H` in place. Pivots at or below `tol * max|diag|` are rejected.
    #[allow(clippy::needless_range_loop)]
    pub fn factor(mut self, tol: f64) -> Result<LdlFactor, FactorError> {
        let n = self.size();
        let scale = (0..n).map(|i| self.get(i, i).re.abs()).fold(0.0, f64::max);
        let floor = tol * scale;
        let mut diag = vec![0.0; n];
        for i in 0..n {
            let fi = self.first[i];
            let oi = self.offset[i];
            for j in fi..i {
                let fj = self.first[j];
                let start = fi.max(fj);
                let oj = self.offset[j];
                let mut acc = self.values[oi + j - fi];
                for k in start..j {
                    acc -= self.values[oi + k - fi] * diag[k] * self.values[oj + k - fj].conj();
                }
                self.values[oi + j - fi] = acc / diag[j];
            }
            let mut d = self.values[oi + i - fi].re;
            for k in fi..i {
                d -= self.values[oi + k - fi].norm_sqr() * diag[k];
            }
            if !(d > floor) {
                return Err(FactorError::NotPositiveDefinite { index: i, pivot: d });
            }
            diag[i] = d;
            self.values[oi + i - fi] = Complex64::new(1.0, 0.0);
        }
        Ok(LdlFactor { lower: self, diag })
    }
}

/// Unit lower-triangular `L` (envelope) and real positive `D`.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    lower: EnvelopeMatrix,
    diag: Vec<f64>,
}

impl LdlFactor {
    pub fn pivots(&self) -> &[f64] {
        &self.diag
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>, FactorError> {
        let n = self.diag.len();
        if rhs.len() != n {
            return Err(FactorError::DimensionMismatch { expected: n, found: rhs.len() });
        }
        let mut z = rhs.to_vec();
        for i in 0..n {
            let fi = self.lower.first(i);
            let row = self.lower.row(i);
            let mut acc = z[i];
            for (k, l) in (fi..i).zip(row) {
                acc -= l * z[k];
            }
            z[i] = acc;
        }
        for (zi, d) in z.iter_mut().zip(&self.diag) {
            *zi /= d;
        }
        for i in (0..n).rev() {
            let fi = self.lower.first(i);
            let row = self.lower.row(i);
            let zi = z[i];
            for (k, l) in (fi..i).zip(row) {
                z[k] -= l.conj() * zi;
            }
        }
        Ok(z)
    }
}
