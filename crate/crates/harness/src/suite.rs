//! Figure suites: fixed evaluation setups over stored checkpoints.
//!
//! Each suite names the training configs whose checkpoints it needs, the
//! channel it is evaluated on and the baselines to compare with. Running a
//! suite writes `ber.csv`, `frames.csv` and `manifest.toml` into
//! `<out_dir>/<name>/`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use banddet::detector::load_detector;
use serde::Serialize;

use crate::config::{ChannelChoice, NoiseChoice, TrainingConfig};
use crate::eval::{evaluate_ber, DetectorKind, EvalConfig, NamedDetector, StopRule};
use crate::scenario::Scenario;
use crate::{sha256_hex, HarnessError};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    /// Where `train` wrote the checkpoints (`<name>.bdcd`).
    pub checkpoint_dir: PathBuf,
    /// Where the training configs live (`<file>.toml`).
    pub config_dir: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Overrides the suite's stop rule.
    pub stop: Option<StopRule>,
    /// Overrides the suite's SNR points.
    pub snrs_db: Option<Vec<f64>>,
}

impl SuiteOptions {
    pub fn new(
        checkpoint_dir: impl Into<PathBuf>,
        config_dir: impl Into<PathBuf>,
        out_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            checkpoint_dir: checkpoint_dir.into(),
            config_dir: config_dir.into(),
            out_dir: out_dir.into(),
            seed: 1,
            stop: None,
            snrs_db: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Curve {
    /// Trained detector from `configs/<file>.toml`.
    Trained {
        label: &'static str,
        config: &'static str,
    },
    Baseline {
        label: &'static str,
        kind: BaselineKind,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BaselineKind {
    Lmmse,
    Ls,
    LocalLmmse,
    LocalLs,
}

impl BaselineKind {
    fn detector(self) -> DetectorKind {
        match self {
            BaselineKind::Lmmse => DetectorKind::Lmmse,
            BaselineKind::Ls => DetectorKind::Ls,
            BaselineKind::LocalLmmse => DetectorKind::LocalLmmse,
            BaselineKind::LocalLs => DetectorKind::LocalLs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Figure {
    name: &'static str,
    description: &'static str,
    scenario: Scenario,
    curves: Vec<Curve>,
}

const LINEAR: [Curve; 2] = [
    Curve::Baseline { label: "lmmse", kind: BaselineKind::Lmmse },
    Curve::Baseline { label: "ls", kind: BaselineKind::Ls },
];

fn trained(label: &'static str, config: &'static str) -> Curve {
    Curve::Trained { label, config }
}

fn with_linear(mut curves: Vec<Curve>) -> Vec<Curve> {
    curves.extend(LINEAR);
    curves
}

fn figures() -> Vec<Figure> {
    let near = |k| Scenario { channel: ChannelChoice::NearBandedRayleigh, ..Scenario::banded(k, 1) };
    vec![
        Figure {
            name: "fig7",
            description: "banded Rayleigh, K = 20, B = 1, Gaussian noise",
            scenario: Scenario::banded(20, 1),
            curves: with_linear(vec![
                trained("cnn-ktrain20", "k20_b1_cnn"),
                trained("cnn-ktrain100", "k100_b1_cnn"),
                trained("mlp-ktrain20", "k20_b1_mlp"),
            ]),
        },
        Figure {
            name: "fig8",
            description: "banded Rayleigh, K = 100, B = 1, Gaussian noise",
            scenario: Scenario::banded(100, 1),
            curves: with_linear(vec![trained("cnn-ktrain20", "k20_b1_cnn"), trained("cnn-ktrain100", "k100_b1_cnn")]),
        },
        Figure {
            name: "fig10",
            description: "banded Rayleigh, K = 100, B = 2, Gaussian noise",
            scenario: Scenario::banded(100, 2),
            curves: with_linear(vec![trained("cnn", "k100_b2_cnn")]),
        },
        Figure {
            name: "fig11",
            description: "banded Rayleigh, K = 100, B = 1, Gaussian-mixture noise",
            scenario: Scenario { noise: NoiseChoice::GaussianMixture, ..Scenario::banded(100, 1) },
            curves: with_linear(vec![trained("cnn", "k100_b1_gm_cnn")]),
        },
        Figure {
            name: "fig12",
            description: "near-banded Rayleigh, K = 20, B = 1",
            scenario: near(20),
            curves: with_linear(vec![
                trained("ccnn-ktrain20", "near_k20_ccnn"),
                trained("cnn-ktrain20", "near_k20_cnn"),
                trained("ccnn-ktrain100", "near_k100_ccnn"),
                trained("cnn-ktrain100", "near_k100_cnn"),
            ]),
        },
        Figure {
            name: "fig13",
            description: "near-banded Rayleigh, K = 100, B = 1",
            scenario: near(100),
            curves: with_linear(vec![trained("ccnn", "near_k100_ccnn"), trained("cnn", "near_k100_cnn")]),
        },
        Figure {
            name: "fig14",
            description: "underwater acoustic OFDM, K = 1024, B = 1",
            scenario: Scenario { channel: ChannelChoice::Underwater, ..Scenario::banded(1024, 1) },
            curves: with_linear(vec![trained("cnn", "underwater_cnn")]),
        },
        Figure {
            name: "fig15",
            description: "doubly selective OFDM, K = 128, B = 1, f_d = 0.005",
            scenario: Scenario {
                channel: ChannelChoice::DoublySelective,
                max_doppler: 0.005,
                ..Scenario::banded(128, 1)
            },
            curves: with_linear(vec![trained("cnn", "doubly_selective_cnn")]),
        },
        Figure {
            name: "fig16",
            description: "2-D recording channel, 64 x 64 grid, B = 1",
            scenario: Scenario { channel: ChannelChoice::Tdmr, grid_rows: 64, ..Scenario::banded(64, 1) },
            curves: vec![
                trained("cnn2d", "tdmr_cnn2d"),
                Curve::Baseline { label: "local-lmmse", kind: BaselineKind::LocalLmmse },
                Curve::Baseline { label: "local-ls", kind: BaselineKind::LocalLs },
            ],
        },
    ]
}

/// Names accepted by [`run_suite`].
pub fn suite_names() -> Vec<String> {
    figures().iter().map(|f| f.name.to_string()).collect()
}

/// Config files a suite needs checkpoints for.
pub fn suite_configs(name: &str) -> Result<Vec<String>, HarnessError> {
    let fig = find(name)?;
    Ok(fig
        .curves
        .iter()
        .filter_map(|c| match c {
            Curve::Trained { config, .. } => Some(config.to_string()),
            Curve::Baseline { .. } => None,
        })
        .collect())
}

fn find(name: &str) -> Result<Figure, HarnessError> {
    figures()
        .into_iter()
        .find(|f| f.name == name)
        .ok_or_else(|| HarnessError::UnknownSuite { name: name.into(), valid: suite_names() })
}

#[derive(Serialize)]
struct Manifest {
    suite: String,
    description: String,
    seed: u64,
    snrs_db: Vec<f64>,
    max_bits: u64,
    max_errors: u64,
    min_bits: u64,
    scenario: ScenarioRecord,
    frames: Vec<FrameRecord>,
    curves: Vec<CurveRecord>,
}

#[derive(Serialize)]
struct ScenarioRecord {
    channel: ChannelChoice,
    noise: NoiseChoice,
    size: usize,
    half_bandwidth: usize,
    grid_rows: usize,
    max_doppler: f64,
}

#[derive(Serialize)]
struct FrameRecord {
    snr_db: f64,
    frames: u64,
    sha256: String,
}

#[derive(Serialize)]
struct CurveRecord {
    label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoint_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<TrainingConfig>,
}

/// Default SNR grid of the suites.
pub const SUITE_SNRS: [f64; 6] = [3.0, 5.0, 7.0, 9.0, 11.0, 13.0];

/// Evaluates one figure and returns the directory holding its artifacts.
pub fn run_suite(name: &str, opts: &SuiteOptions) -> Result<PathBuf, HarnessError> {
    let fig = find(name)?;
    let mut detectors = Vec::new();
    let mut records = Vec::new();
    for curve in &fig.curves {
        match curve {
            Curve::Trained { label, config } => {
                let cfg_path = opts.config_dir.join(format!("{config}.toml"));
                let cfg = TrainingConfig::load(&cfg_path)?;
                let ckpt = opts.checkpoint_dir.join(format!("{}.bdcd", cfg.name));
                let bytes = fs::read(&ckpt).map_err(|_| HarnessError::MissingCheckpoint {
                    path: ckpt.display().to_string(),
                    command: format!(
                        "banddet train --config {} --out-dir {}",
                        cfg_path.display(),
                        opts.checkpoint_dir.display()
                    ),
                })?;
                let det = load_detector(bytes.as_slice())?;
                detectors.push(NamedDetector::neural(*label, &det));
                records.push(CurveRecord {
                    label: label.to_string(),
                    checkpoint: Some(ckpt.display().to_string()),
                    checkpoint_sha256: Some(sha256_hex(&bytes)),
                    config: Some(cfg),
                });
            }
            Curve::Baseline { label, kind } => {
                detectors.push(NamedDetector::new(*label, kind.detector()));
                records.push(CurveRecord {
                    label: label.to_string(),
                    checkpoint: None,
                    checkpoint_sha256: None,
                    config: None,
                });
            }
        }
    }
    let snrs = opts.snrs_db.clone().unwrap_or_else(|| SUITE_SNRS.to_vec());
    let stop = opts.stop.unwrap_or_default();
    let eval = EvalConfig { stop, ..EvalConfig::new(fig.scenario.clone(), snrs.clone(), opts.seed) };
    let report = evaluate_ber(&detectors, &eval)?;

    let dir = opts.out_dir.join(fig.name);
    fs::create_dir_all(&dir)?;
    report.write_csv(BufWriter::new(File::create(dir.join("ber.csv"))?))?;
    report.write_frame_log(BufWriter::new(File::create(dir.join("frames.csv"))?))?;
    let sc = &fig.scenario;
    let manifest = Manifest {
        suite: fig.name.into(),
        description: fig.description.into(),
        seed: opts.seed,
        snrs_db: snrs,
        max_bits: stop.max_bits,
        max_errors: stop.max_errors,
        min_bits: stop.min_bits,
        scenario: ScenarioRecord {
            channel: sc.channel,
            noise: sc.noise,
            size: sc.size,
            half_bandwidth: sc.half_bandwidth,
            grid_rows: sc.grid_rows,
            max_doppler: sc.max_doppler,
        },
        frames: report
            .frames
            .iter()
            .map(|f| FrameRecord { snr_db: f.snr_db, frames: f.frames, sha256: f.sha256.clone() })
            .collect(),
        curves: records,
    };
    let text = toml::to_string(&manifest).map_err(|e| HarnessError::Config(e.to_string()))?;
    fs::write(dir.join("manifest.toml"), text)?;
    Ok(dir)
}

/// Path of the checkpoint that `train` writes for a config file.
pub fn checkpoint_path(config: &Path, checkpoint_dir: &Path) -> Result<PathBuf, HarnessError> {
    let cfg = TrainingConfig::load(config)?;
    Ok(checkpoint_dir.join(format!("{}.bdcd", cfg.name)))
}
