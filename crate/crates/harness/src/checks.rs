//! Self-checks: gradients against finite differences, banded solvers and
//! convolutions against dense oracles.

use std::fmt;
use std::time::Instant;

use banddet::channel::{complex_normal, draw_banded_rayleigh, draw_near_banded_rayleigh, substream, BandMatrix};
use banddet::classical::{detect_lmmse, detect_ls};
use banddet::nn::{
    grad_check, init_weights, Activation, BlockConv1d, Conv2d, Dense, GradCheckReport, InitScheme, Layer, Network,
    Padding, Tensor,
};
use nalgebra::{Complex, DMatrix, DVector};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::HarnessError;

pub const GRAD_STEP: f64 = 1e-5;
pub const GRAD_TOLERANCE: f64 = 1e-4;
pub const SOLVER_TOLERANCE: f64 = 1e-8;
pub const CONV_TOLERANCE: f64 = 1e-12;

fn uniform_tensor(rng: &mut ChaCha8Rng, shape: [usize; 4]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("shape matches")
}

fn network(layers: Vec<Layer<f64>>, seed: u64) -> Result<Network<f64>, HarnessError> {
    let mut net = Network::new(layers)?;
    init_weights(&mut net, InitScheme::FanInUniform, seed);
    // nonzero biases so that every bias gradient is exercised
    let mut rng = substream(seed, 1);
    for layer in net.layers_mut() {
        layer.params_mut().b.mapv_inplace(|_| rng.random_range(-0.2..0.2));
    }
    Ok(net)
}

/// Gradient checks on small random networks covering every layer type,
/// both paddings, the side-input term and both activations.
pub fn gradcheck_suite(seed: u64) -> Result<Vec<(String, GradCheckReport)>, HarnessError> {
    let mut rng = substream(seed, 0);
    let mut out = Vec::new();
    for padding in [Padding::Zero, Padding::Cyclic] {
        let net = network(
            vec![
                Layer::Conv1d(BlockConv1d::new(8, 3, 5, padding, Activation::Relu)?),
                Layer::Conv1d(BlockConv1d::new(5, 3, 4, padding, Activation::Relu)?),
                Layer::Conv1d(BlockConv1d::new(4, 3, 1, padding, Activation::Sigmoid)?),
            ],
            seed + 1,
        )?;
        let x = uniform_tensor(&mut rng, [2, 1, 6, 8]);
        let t: Vec<f64> = (0..12).map(|_| rng.random_range(0.0..1.0)).collect();
        out.push((format!("conv1d {padding:?} padding"), grad_check(&net, &x, None, &t, GRAD_STEP, GRAD_TOLERANCE)?));
    }
    let net = network(
        vec![
            Layer::Conv2d(Conv2d::new(1, 1, 4, Some(4), Activation::Relu)?),
            Layer::Conv2d(Conv2d::new(4, 1, 3, None, Activation::Relu)?),
            Layer::Conv2d(Conv2d::new(3, 1, 1, None, Activation::Sigmoid)?),
        ],
        seed + 2,
    )?;
    let x = uniform_tensor(&mut rng, [2, 4, 5, 1]);
    let side = Array2::from_shape_fn((2, 4), |_| rng.random_range(-1.0..1.0));
    let t: Vec<f64> = (0..40).map(|_| rng.random_range(0.0..1.0)).collect();
    out.push(("conv2d with side input".into(), grad_check(&net, &x, Some(&side), &t, GRAD_STEP, GRAD_TOLERANCE)?));
    let net = network(
        vec![
            Layer::Conv2d(Conv2d::new(2, 1, 3, None, Activation::Relu)?),
            Layer::Conv2d(Conv2d::new(3, 1, 1, None, Activation::Sigmoid)?),
        ],
        seed + 3,
    )?;
    let x = uniform_tensor(&mut rng, [1, 5, 4, 2]);
    let t: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..1.0)).collect();
    out.push(("conv2d without side input".into(), grad_check(&net, &x, None, &t, GRAD_STEP, GRAD_TOLERANCE)?));
    let net = network(
        vec![
            Layer::Dense(Dense::new(12, 7, Activation::Relu)?),
            Layer::Dense(Dense::new(7, 5, Activation::Relu)?),
            Layer::Dense(Dense::new(5, 3, Activation::Sigmoid)?),
        ],
        seed + 4,
    )?;
    let x = uniform_tensor(&mut rng, [3, 1, 3, 4]);
    let t: Vec<f64> = (0..9).map(|_| rng.random_range(0.0..1.0)).collect();
    out.push(("dense".into(), grad_check(&net, &x, None, &t, GRAD_STEP, GRAD_TOLERANCE)?));
    Ok(out)
}

fn dense_matrix<C: BandMatrix>(channel: &C) -> DMatrix<Complex<f64>> {
    let k = channel.size();
    DMatrix::from_row_slice(k, k, &channel.to_dense())
}

/// `H^H (H H^H + sigma2 I)^{-1} y` by dense LU.
pub fn dense_lmmse<C: BandMatrix>(channel: &C, y: &[Complex<f64>], sigma2: f64) -> Option<Vec<Complex<f64>>> {
    let h = dense_matrix(channel);
    let k = h.nrows();
    let gram = &h * h.adjoint() + DMatrix::identity(k, k) * Complex::new(sigma2, 0.0);
    let z = gram.lu().solve(&DVector::from_column_slice(y))?;
    Some((h.adjoint() * z).iter().copied().collect())
}

/// Least-squares solution through the pseudo-inverse.
pub fn dense_ls<C: BandMatrix>(channel: &C, y: &[Complex<f64>]) -> Option<Vec<Complex<f64>>> {
    let pinv = dense_matrix(channel).pseudo_inverse(1e-14).ok()?;
    Some((pinv * DVector::from_column_slice(y)).iter().copied().collect())
}

fn rel_error(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    diff / norm.max(f64::MIN_POSITIVE)
}

/// Dense block-banded matrix form of a 1-D convolution, applied to `x`.
pub fn conv1d_dense(layer: &BlockConv1d<f64>, x: &Tensor<f64>) -> Vec<f64> {
    let k = x.cols();
    let (c, o, h) = (layer.in_block, layer.out_depth, layer.half_window() as isize);
    let mut big = Array2::<f64>::zeros((k * o, k * c));
    for pos in 0..k {
        for j in 0..layer.window_blocks {
            let mut m = pos as isize + j as isize - h;
            if layer.padding == Padding::Cyclic {
                m = m.rem_euclid(k as isize);
            } else if m < 0 || m >= k as isize {
                continue;
            }
            for oo in 0..o {
                for cc in 0..c {
                    big[[pos * o + oo, m as usize * c + cc]] += layer.params.w[[oo, j * c + cc]];
                }
            }
        }
    }
    let mut out = Vec::with_capacity(x.samples() * k * o);
    for s in 0..x.samples() {
        let xs = ndarray::ArrayView1::from(&x.as_slice()[s * k * c..(s + 1) * k * c]);
        let z = big.dot(&xs);
        out.extend(z.iter().enumerate().map(|(r, &v)| layer.activation.apply(v + layer.params.b[r % o])));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSummary {
    pub cases: usize,
    pub lmmse_max_rel: f64,
    pub ls_max_rel: f64,
    pub conv_max_abs: f64,
    pub solver_seconds: f64,
    pub conv_seconds: f64,
}

impl OracleSummary {
    pub fn passed(&self) -> bool {
        self.lmmse_max_rel <= SOLVER_TOLERANCE
            && self.ls_max_rel <= SOLVER_TOLERANCE
            && self.conv_max_abs <= CONV_TOLERANCE
    }
}

impl fmt::Display for OracleSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} cases: lmmse max rel {:.2e}, ls max rel {:.2e} ({:.3} s); conv1d max abs {:.2e} ({:.3} s)",
            self.cases, self.lmmse_max_rel, self.ls_max_rel, self.solver_seconds, self.conv_max_abs, self.conv_seconds
        )
    }
}

/// Banded and cyclic solver instances with `K <= 16`, `B` in `{0, 1, 2}`.
pub fn solver_oracle_errors(seed: u64, cases: usize) -> Result<(f64, f64), HarnessError> {
    let mut rng = substream(seed, 10);
    let (mut lmmse_max, mut ls_max) = (0f64, 0f64);
    for case in 0..cases {
        let b = case % 3;
        let k = rng.random_range(1..=16usize);
        let sigma2 = 10f64.powf(-rng.random_range(0.0..2.0));
        let cyclic = case % 2 == 1 && k > 2 * b + 1;
        let y: Vec<Complex<f64>> = (0..k).map(|_| complex_normal(&mut rng)).collect();
        let (lmmse, ls, want_lmmse, want_ls) = if cyclic {
            let ch = draw_near_banded_rayleigh(k, b, &mut rng)?;
            (detect_lmmse(&ch, &y, sigma2)?, detect_ls(&ch, &y)?, dense_lmmse(&ch, &y, sigma2), dense_ls(&ch, &y))
        } else {
            let ch = draw_banded_rayleigh(k, b, &mut rng)?;
            (detect_lmmse(&ch, &y, sigma2)?, detect_ls(&ch, &y)?, dense_lmmse(&ch, &y, sigma2), dense_ls(&ch, &y))
        };
        let fail = || HarnessError::CheckFailed(format!("dense oracle failed on case {case}"));
        lmmse_max = lmmse_max.max(rel_error(&lmmse.soft, &want_lmmse.ok_or_else(fail)?));
        ls_max = ls_max.max(rel_error(&ls.soft, &want_ls.ok_or_else(fail)?));
    }
    Ok((lmmse_max, ls_max))
}

/// Largest absolute difference between the convolution and its dense form.
pub fn conv_oracle_error(seed: u64, cases: usize) -> Result<f64, HarnessError> {
    let mut rng = substream(seed, 11);
    let mut worst = 0f64;
    for case in 0..cases {
        let padding = if case % 2 == 0 { Padding::Zero } else { Padding::Cyclic };
        let act = if case % 3 == 0 { Activation::Sigmoid } else { Activation::Relu };
        let in_block = rng.random_range(1..=8);
        let window = 2 * rng.random_range(0..=2) + 1;
        let out = rng.random_range(1..=6);
        let k = rng.random_range(1..=12);
        let mut net = Network::new(vec![Layer::Conv1d(BlockConv1d::new(in_block, window, out, padding, act)?)])?;
        init_weights(&mut net, InitScheme::FanInUniform, seed + case as u64);
        let x = uniform_tensor(&mut rng, [2, 1, k, in_block]);
        let got = net.forward(&x, None)?;
        let Layer::Conv1d(layer) = &net.layers()[0] else { unreachable!() };
        let want = conv1d_dense(layer, &x);
        for (a, b) in got.as_slice().iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

/// Runs the solver and convolution oracles; fails if any tolerance is exceeded.
pub fn oracle_check(seed: u64, cases: usize) -> Result<OracleSummary, HarnessError> {
    let t = Instant::now();
    let (lmmse_max_rel, ls_max_rel) = solver_oracle_errors(seed, cases)?;
    let solver_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let conv_max_abs = conv_oracle_error(seed, cases)?;
    let summary = OracleSummary {
        cases,
        lmmse_max_rel,
        ls_max_rel,
        conv_max_abs,
        solver_seconds,
        conv_seconds: t.elapsed().as_secs_f64(),
    };
    if summary.passed() {
        Ok(summary)
    } else {
        Err(HarnessError::CheckFailed(summary.to_string()))
    }
}
