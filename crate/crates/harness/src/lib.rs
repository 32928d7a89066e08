//! Training, BER evaluation and figure suites for the banded-channel detectors.

// `!(x >= 0.0)` style guards are there to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod config;
pub mod eval;
pub mod scenario;
pub mod stats;
pub mod suite;
pub mod train;

use banddet::channel::ChannelError;
use banddet::classical::DetectError;
use banddet::detector::DetectorError;
use banddet::nn::NnError;
use thiserror::Error;

pub use config::{ArchitectureChoice, ChannelChoice, NoiseChoice, Precision, TrainingConfig};
pub use eval::{evaluate_ber, BerReport, BerRow, DetectorKind, EvalConfig, NamedDetector, StopRule};
pub use scenario::{generate_dataset, Sample, Scenario, Split};
pub use train::{train, TrainOutcome};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error("training diverged at epoch {epoch}, step {step}: loss {loss}")]
    Diverged { epoch: usize, step: usize, loss: f64 },
    #[error("checkpoint {path} not found; create it with `{command}`")]
    MissingCheckpoint { path: String, command: String },
    #[error("unknown suite {name:?}; valid names: {}", valid.join(", "))]
    UnknownSuite { name: String, valid: Vec<String> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Network(#[from] NnError),
}

impl HarnessError {
    /// Process exit status: 2 for invalid input or a failed check, 3 for
    /// divergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::CheckFailed(_) | HarnessError::UnknownSuite { .. } => 2,
            HarnessError::Diverged { .. } => 3,
            _ => 1,
        }
    }
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Keeps freed training buffers in the heap instead of returning them to the
/// kernel after every step. Tens of megabytes are allocated and dropped per
/// minibatch; with glibc defaults most of that turns into page faults.
pub fn tune_allocator() {
    #[cfg(all(target_os = "linux", target_env = "gnu"))]
    unsafe {
        libc::mallopt(libc::M_MMAP_THRESHOLD, 32 << 20);
        libc::mallopt(libc::M_TRIM_THRESHOLD, 1 << 30);
        libc::mallopt(libc::M_TOP_PAD, 256 << 20);
    }
}
