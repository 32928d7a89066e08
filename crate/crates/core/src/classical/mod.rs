//! Model-based baselines with perfect channel knowledge.

mod local2d;
mod map;

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::BandMatrix;
use crate::linalg::{EnvelopeMatrix, FactorError, LdlFactor};

pub use local2d::{detect_local_2d, LocalDetector2d, LocalKind};
pub use map::{detect_map_exhaustive, MAX_MAP_SIZE};

/// Relative pivot floor below which the Gram matrix is declared singular.
const PIVOT_TOL: f64 = 1e-13;
/// Refinement sweeps applied to the least-squares solution.
const LS_REFINEMENT_STEPS: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("receive vector has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("channel matrix is rank deficient")]
    Singular(#[source] FactorError),
    #[error("noise variance must be nonnegative, got {0}")]
    InvalidNoiseVariance(f64),
    #[error("exhaustive search over 2^{0} candidates exceeds the limit of 2^{MAX_MAP_SIZE}")]
    TooLarge(usize),
}

/// Linear estimate and its sign projection.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftDecision {
    pub soft: Vec<Complex64>,
    pub hard: Vec<i8>,
}

impl SoftDecision {
    pub fn from_soft(soft: Vec<Complex64>) -> Self {
        let hard = soft.iter().map(|s| hard_decision(s.re)).collect();
        Self { soft, hard }
    }
}

/// Sign with ties at zero resolved to `+1`.
pub fn hard_decision(v: f64) -> i8 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

/// `H H^H + sigma2 I` in envelope storage; bandwidth `2B`, cyclic if `H` is.
pub fn gram_matrix<C: BandMatrix>(channel: &C, sigma2: f64) -> EnvelopeMatrix {
    let n = channel.size();
    let mut by_column: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); n];
    for k in 0..n {
        for (m, h) in channel.row_entries(k) {
            by_column[m].push((k, h));
        }
    }
    let mut first: Vec<usize> = (0..n).collect();
    for col in &by_column {
        for &(i, _) in col {
            for &(j, _) in col {
                if j < first[i] {
                    first[i] = j;
                }
            }
        }
    }
    let mut gram = EnvelopeMatrix::zeros(first);
    for col in &by_column {
        for &(i, hi) in col {
            for &(j, hj) in col {
                if j <= i {
                    gram.add(i, j, hi * hj.conj());
                }
            }
        }
    }
    for i in 0..n {
        gram.add(i, i, Complex64::new(sigma2, 0.0));
    }
    gram
}

fn factor_gram<C: BandMatrix>(channel: &C, sigma2: f64) -> Result<LdlFactor, DetectError> {
    gram_matrix(channel, sigma2).factor(PIVOT_TOL).map_err(DetectError::Singular)
}

fn check_len<C: BandMatrix>(channel: &C, y: &[Complex64]) -> Result<(), DetectError> {
    if y.len() != channel.size() {
        return Err(DetectError::DimensionMismatch { expected: channel.size(), found: y.len() });
    }
    Ok(())
}

/// Least-squares detector: `argmin_x ||y - H x||^2` over complex `x`.
///
/// Solved through the banded system `H H^H u = y`, `x = H^H u`, followed by
/// iterative refinement on the residual.
pub fn detect_ls<C: BandMatrix>(channel: &C, y: &[Complex64]) -> Result<SoftDecision, DetectError> {
    check_len(channel, y)?;
    let factor = factor_gram(channel, 0.0)?;
    let u = factor.solve(y).map_err(DetectError::Singular)?;
    let mut x = channel.apply_adjoint(&u);
    for _ in 0..LS_REFINEMENT_STEPS {
        let hx = channel.apply(&x);
        let residual: Vec<Complex64> = y.iter().zip(&hx).map(|(a, b)| a - b).collect();
        let du = factor.solve(&residual).map_err(DetectError::Singular)?;
        for (xi, d) in x.iter_mut().zip(channel.apply_adjoint(&du)) {
            *xi += d;
        }
    }
    Ok(SoftDecision::from_soft(x))
}

/// Banded LMMSE detector: `H^H (H H^H + sigma2 I)^{-1} y`.
///
/// `sigma2 == 0` reduces to [`detect_ls`].
pub fn detect_lmmse<C: BandMatrix>(channel: &C, y: &[Complex64], sigma2: f64) -> Result<SoftDecision, DetectError> {
    if !(sigma2 >= 0.0) {
        return Err(DetectError::InvalidNoiseVariance(sigma2));
    }
    if sigma2 == 0.0 {
        return detect_ls(channel, y);
    }
    check_len(channel, y)?;
    if sigma2.is_infinite() {
        return Ok(SoftDecision::from_soft(vec![Complex64::new(0.0, 0.0); y.len()]));
    }
    let u = factor_gram(channel, sigma2)?.solve(y).map_err(DetectError::Singular)?;
    Ok(SoftDecision::from_soft(channel.apply_adjoint(&u)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{
        draw_banded_rayleigh, draw_near_banded_rayleigh, random_symbols, substream, transmit, BandedChannel,
        CyclicBandedChannel, NoiseKind, NoiseModel,
    };
    use nalgebra::DMatrix;

    fn dense<C: BandMatrix>(ch: &C) -> DMatrix<Complex64> {
        let n = ch.size();
        DMatrix::from_row_slice(n, n, &ch.to_dense())
    }

    fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        num / den.max(1e-300)
    }

    #[test]
    fn scalar_cases() {
        let ch = BandedChannel::new(1, 0, vec![Complex64::new(2.0, 0.0)]).unwrap();
        let y = [Complex64::new(2.0, 0.0)];
        let ls = detect_ls(&ch, &y).unwrap();
        assert!((ls.soft[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(ls.hard, vec![1]);
        let y = [Complex64::new(0.7, -0.3)];
        let lmmse = detect_lmmse(&ch, &y, 0.5).unwrap();
        assert!((lmmse.soft[0] - y[0] * 2.0 / 4.5).norm() < 1e-15);
        let big = detect_lmmse(&ch, &y, 1e300).unwrap();
        assert!(big.soft[0].norm() < 1e-290);
        assert_eq!(detect_lmmse(&ch, &y, f64::INFINITY).unwrap().hard, vec![1]);
        assert!(detect_lmmse(&ch, &y, -1.0).is_err());
    }

    #[test]
    fn ls_recovers_noiseless_symbols() {
        let mut rng = substream(61, 0);
        let ch = draw_banded_rayleigh(8, 1, &mut rng).unwrap();
        let x = random_symbols(8, &mut rng);
        let f = transmit(&ch, &x, &NoiseModel::noiseless(), &mut rng).unwrap();
        assert_eq!(detect_ls(&ch, &f.y).unwrap().hard, x);
    }

    #[test]
    fn ls_matches_dense_pseudo_inverse() {
        let mut rng = substream(62, 0);
        let ch = draw_banded_rayleigh(12, 2, &mut rng).unwrap();
        let x = random_symbols(12, &mut rng);
        let noise = NoiseModel::from_snr(NoiseKind::ComplexGaussian, 5.0, 5.0);
        let f = transmit(&ch, &x, &noise, &mut rng).unwrap();
        let pinv = dense(&ch).pseudo_inverse(1e-14).unwrap();
        let want = pinv * nalgebra::DVector::from_column_slice(&f.y);
        let got = detect_ls(&ch, &f.y).unwrap().soft;
        assert!(rel_err(&got, want.as_slice()) < 1e-9);
    }

    #[test]
    fn lmmse_matches_dense_inverse() {
        let mut rng = substream(63, 0);
        for cyclic in [false, true] {
            let y: Vec<Complex64> = (0..16).map(|_| crate::channel::complex_normal(&mut rng)).collect();
            let (got, h) = if cyclic {
                let ch = draw_near_banded_rayleigh(16, 1, &mut rng).unwrap();
                (detect_lmmse(&ch, &y, 0.5).unwrap().soft, dense(&ch))
            } else {
                let ch = draw_banded_rayleigh(16, 1, &mut rng).unwrap();
                (detect_lmmse(&ch, &y, 0.5).unwrap().soft, dense(&ch))
            };
            let a = &h * h.adjoint() + DMatrix::<Complex64>::identity(16, 16) * Complex64::new(0.5, 0.0);
            let want = h.adjoint() * a.try_inverse().unwrap() * nalgebra::DVector::from_column_slice(&y);
            assert!(rel_err(&got, want.as_slice()) < 1e-8, "cyclic={cyclic}");
        }
    }

    #[test]
    fn singular_channel_is_flagged() {
        let mut band = vec![Complex64::new(1.0, 0.0); 3];
        band[1] = Complex64::new(0.0, 0.0);
        let ch = BandedChannel::new(3, 0, band).unwrap();
        assert!(matches!(detect_ls(&ch, &[Complex64::new(1.0, 0.0); 3]), Err(DetectError::Singular(_))));
    }

    #[test]
    fn cyclic_lmmse_is_rotation_equivariant() {
        let mut rng = substream(64, 0);
        let ch = draw_near_banded_rayleigh(11, 2, &mut rng).unwrap();
        let y: Vec<Complex64> = (0..11).map(|_| crate::channel::complex_normal(&mut rng)).collect();
        let base = detect_lmmse(&ch, &y, 0.3).unwrap().soft;
        for shift in 1..11 {
            let rot: CyclicBandedChannel = ch.rotated(shift);
            let mut y_rot = vec![Complex64::new(0.0, 0.0); 11];
            for k in 0..11 {
                y_rot[(k + shift) % 11] = y[k];
            }
            let out = detect_lmmse(&rot, &y_rot, 0.3).unwrap().soft;
            for k in 0..11 {
                assert!((out[(k + shift) % 11] - base[k]).norm() < 1e-10);
            }
        }
    }
}
