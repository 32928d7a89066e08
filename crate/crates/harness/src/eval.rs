//! Monte-Carlo BER evaluation on shared frames.
//!
//! Every detector in one run sees exactly the same frames: frame `i` at SNR
//! point `s` is drawn from stream `(s << 40) + i` of the run seed. Besides
//! per-detector error counts the evaluator keeps, for each ordered pair of
//! detectors, the number of bits only the first one got wrong, which is what
//! the paired sign test needs.

use std::io::Write;
use std::time::Instant;

use banddet::channel::{random_symbols, substream};
use banddet::classical::{detect_lmmse, detect_local_2d, detect_ls, detect_map_exhaustive, DetectError, LocalKind};
use banddet::detector::{postprocess, NeuralDetector, PreprocessedInput};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::scenario::{Sample, Scenario};
use crate::stats::{clopper_pearson, sign_test_p};
use crate::HarnessError;

/// Frames per neural forward pass.
const NEURAL_CHUNK: usize = 64;

#[derive(Debug, Clone)]
pub enum DetectorKind {
    Neural(Box<NeuralDetector<f32>>),
    Lmmse,
    Ls,
    Map,
    LocalLmmse,
    LocalLs,
    /// Returns the transmitted symbols.
    Oracle,
    /// Ignores the input and guesses.
    CoinFlip,
}

#[derive(Debug, Clone)]
pub struct NamedDetector {
    pub label: String,
    pub kind: DetectorKind,
}

impl NamedDetector {
    pub fn new(label: impl Into<String>, kind: DetectorKind) -> Self {
        Self { label: label.into(), kind }
    }

    pub fn neural(label: impl Into<String>, det: &NeuralDetector<f64>) -> Self {
        Self::new(label, DetectorKind::Neural(Box::new(det.cast())))
    }
}

/// Stop once `max_bits` bits are tested, or once every detector has made
/// `max_errors` errors and at least `min_bits` bits are tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopRule {
    pub max_bits: u64,
    pub max_errors: u64,
    pub min_bits: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { max_bits: 10_000_000, max_errors: 200, min_bits: 0 }
    }
}

impl StopRule {
    /// Exactly `bits` bits (rounded up to whole batches).
    pub fn fixed_bits(bits: u64) -> Self {
        Self { max_bits: bits, max_errors: u64::MAX, min_bits: bits }
    }

    fn done(&self, bits: u64, min_errors: u64) -> bool {
        bits >= self.max_bits || (bits >= self.min_bits && min_errors >= self.max_errors)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub scenario: Scenario,
    pub snrs_db: Vec<f64>,
    pub stop: StopRule,
    pub seed: u64,
    /// Frames generated and detected between stop-rule checks.
    pub batch_frames: usize,
    pub alpha: f64,
}

impl EvalConfig {
    pub fn new(scenario: Scenario, snrs_db: Vec<f64>, seed: u64) -> Self {
        Self { scenario, snrs_db, stop: StopRule::default(), seed, batch_frames: 64, alpha: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerRow {
    pub detector: String,
    pub snr_db: f64,
    pub errors: u64,
    pub bits: u64,
    pub ber: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Time spent inside this detector.
    pub seconds: f64,
}

/// Frames consumed at one SNR point and their SHA-256.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLog {
    pub snr_db: f64,
    pub frames: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerReport {
    pub detectors: Vec<String>,
    pub snrs_db: Vec<f64>,
    pub rows: Vec<BerRow>,
    /// `discordant[s][a][b]`: bits at SNR point `s` that detector `a` got
    /// wrong and detector `b` got right.
    pub discordant: Vec<Vec<Vec<u64>>>,
    pub frames: Vec<FrameLog>,
    pub seconds: f64,
}

impl BerReport {
    pub fn row(&self, detector: &str, snr_db: f64) -> Option<&BerRow> {
        self.rows.iter().find(|r| r.detector == detector && r.snr_db == snr_db)
    }

    fn index(&self, detector: &str) -> Option<usize> {
        self.detectors.iter().position(|d| d == detector)
    }

    /// `(only a wrong, only b wrong)` at an SNR point.
    pub fn discordance(&self, a: &str, b: &str, snr_db: f64) -> Option<(u64, u64)> {
        let s = self.snrs_db.iter().position(|&v| v == snr_db)?;
        let (i, j) = (self.index(a)?, self.index(b)?);
        Some((self.discordant[s][i][j], self.discordant[s][j][i]))
    }

    /// Two-sided paired sign-test p-value for `a` versus `b`.
    pub fn paired_p(&self, a: &str, b: &str, snr_db: f64) -> Option<f64> {
        self.discordance(a, b, snr_db).map(|(x, y)| sign_test_p(x, y))
    }

    /// Writes the `detector,snr_db,ber,ci_lo,ci_hi,bits` table.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), HarnessError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["detector", "snr_db", "ber", "ci_lo", "ci_hi", "bits"])?;
        for r in &self.rows {
            out.write_record([
                r.detector.clone(),
                r.snr_db.to_string(),
                r.ber.to_string(),
                r.ci_lo.to_string(),
                r.ci_hi.to_string(),
                r.bits.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_frame_log<W: Write>(&self, mut w: W) -> Result<(), HarnessError> {
        writeln!(w, "snr_db,frames,sha256")?;
        for f in &self.frames {
            writeln!(w, "{},{},{}", f.snr_db, f.frames, f.sha256)?;
        }
        Ok(())
    }
}

fn unsupported(label: &str, what: &str) -> HarnessError {
    HarnessError::Config(format!("detector {label} cannot run on {what} frames"))
}

fn detect_one(det: &NamedDetector, sample: &Sample, seed: u64, stream: u64) -> Result<Vec<i8>, HarnessError> {
    let label = &det.label;
    let linear = |out: Result<_, DetectError>| -> Result<Vec<i8>, HarnessError> {
        Ok(out.map(|d: banddet::classical::SoftDecision| d.hard)?)
    };
    match (&det.kind, sample) {
        (DetectorKind::Oracle, s) => Ok(s.x().to_vec()),
        (DetectorKind::CoinFlip, s) => Ok(random_symbols(s.x().len(), &mut substream(seed ^ 0xc011, stream))),
        (DetectorKind::Lmmse, Sample::Banded { channel, frame }) => {
            linear(detect_lmmse(channel, &frame.y, frame.sigma2))
        }
        (DetectorKind::Lmmse, Sample::Cyclic { channel, frame }) => {
            linear(detect_lmmse(channel, &frame.y, frame.sigma2))
        }
        (DetectorKind::Ls, Sample::Banded { channel, frame }) => linear(detect_ls(channel, &frame.y)),
        (DetectorKind::Ls, Sample::Cyclic { channel, frame }) => linear(detect_ls(channel, &frame.y)),
        (DetectorKind::Map, Sample::Banded { channel, frame }) => Ok(detect_map_exhaustive(channel, &frame.y)?),
        (DetectorKind::Map, Sample::Cyclic { channel, frame }) => Ok(detect_map_exhaustive(channel, &frame.y)?),
        (DetectorKind::LocalLmmse, Sample::Grid { channel, frame }) => {
            Ok(detect_local_2d(channel, &frame.y, frame.sigma2, LocalKind::Lmmse)?)
        }
        (DetectorKind::LocalLs, Sample::Grid { channel, frame }) => {
            Ok(detect_local_2d(channel, &frame.y, frame.sigma2, LocalKind::Ls)?)
        }
        (DetectorKind::Neural(_), _) => unreachable!("neural detectors run batched"),
        (_, Sample::Grid { .. }) => Err(unsupported(label, "grid")),
        (_, _) => Err(unsupported(label, "1-D")),
    }
}

fn detect_batch(
    det: &NamedDetector,
    samples: &[Sample],
    seed: u64,
    first_stream: u64,
) -> Result<Vec<Vec<i8>>, HarnessError> {
    match &det.kind {
        DetectorKind::Neural(net) => {
            let inputs: Vec<PreprocessedInput> = samples.iter().map(Sample::preprocess).collect::<Result<_, _>>()?;
            let mut out = Vec::with_capacity(samples.len());
            for chunk in inputs.chunks(NEURAL_CHUNK) {
                let soft = net.soft_batch(chunk)?;
                let mut rest = soft.as_slice();
                for input in chunk {
                    let (head, tail) = rest.split_at(input.positions());
                    out.push(postprocess(head));
                    rest = tail;
                }
            }
            Ok(out)
        }
        _ => samples.par_iter().enumerate().map(|(i, s)| detect_one(det, s, seed, first_stream + i as u64)).collect(),
    }
}

/// Runs every detector over shared frames at each SNR point.
pub fn evaluate_ber(detectors: &[NamedDetector], cfg: &EvalConfig) -> Result<BerReport, HarnessError> {
    if detectors.is_empty() || cfg.snrs_db.is_empty() || cfg.batch_frames == 0 {
        return Err(HarnessError::Config("evaluation needs detectors, SNR points and a positive batch".into()));
    }
    let start = Instant::now();
    let n = detectors.len();
    let mut rows = Vec::new();
    let mut discordant = Vec::new();
    let mut frames_log = Vec::new();
    for (s, &snr) in cfg.snrs_db.iter().enumerate() {
        let base = (s as u64) << 40;
        let mut errors = vec![0u64; n];
        let mut seconds = vec![0f64; n];
        let mut only = vec![vec![0u64; n]; n];
        let mut bits = 0u64;
        let mut frames = 0u64;
        let mut hasher = Sha256::new();
        while !cfg.stop.done(bits, errors.iter().copied().min().unwrap_or(0)) {
            let first = base + frames;
            let samples: Vec<Sample> = (0..cfg.batch_frames as u64)
                .into_par_iter()
                .map(|i| cfg.scenario.draw(snr, &mut substream(cfg.seed, first + i)))
                .collect::<Result<_, _>>()?;
            for sample in &samples {
                hasher.update(sample.digest_bytes());
            }
            let mut decisions = Vec::with_capacity(n);
            for (d, det) in detectors.iter().enumerate() {
                let t = Instant::now();
                decisions.push(detect_batch(det, &samples, cfg.seed, first)?);
                seconds[d] += t.elapsed().as_secs_f64();
            }
            for (f, sample) in samples.iter().enumerate() {
                let x = sample.x();
                for (d, dec) in decisions.iter().enumerate() {
                    if dec[f].len() != x.len() {
                        return Err(HarnessError::Config(format!(
                            "{} returned {} decisions for {} symbols",
                            detectors[d].label,
                            dec[f].len(),
                            x.len()
                        )));
                    }
                }
                for (k, &xk) in x.iter().enumerate() {
                    let wrong: Vec<bool> = decisions.iter().map(|dec| dec[f][k] != xk).collect();
                    for a in 0..n {
                        if wrong[a] {
                            errors[a] += 1;
                            for b in 0..n {
                                if !wrong[b] {
                                    only[a][b] += 1;
                                }
                            }
                        }
                    }
                }
                bits += x.len() as u64;
            }
            frames += samples.len() as u64;
        }
        for (d, det) in detectors.iter().enumerate() {
            let (ci_lo, ci_hi) = clopper_pearson(errors[d], bits, cfg.alpha);
            rows.push(BerRow {
                detector: det.label.clone(),
                snr_db: snr,
                errors: errors[d],
                bits,
                ber: errors[d] as f64 / bits as f64,
                ci_lo,
                ci_hi,
                seconds: seconds[d],
            });
        }
        let sha256 = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
        log::info!("SNR {snr} dB: {frames} frames, {bits} bits");
        frames_log.push(FrameLog { snr_db: snr, frames, sha256 });
        discordant.push(only);
    }
    // keep rows grouped by detector, SNR ascending within each
    rows.sort_by_key(|r| detectors.iter().position(|d| d.label == r.detector));
    Ok(BerReport {
        detectors: detectors.iter().map(|d| d.label.clone()).collect(),
        snrs_db: cfg.snrs_db.clone(),
        rows,
        discordant,
        frames: frames_log,
        seconds: start.elapsed().as_secs_f64(),
    })
}
