//! Training configuration, read from a flat TOML file.

use std::path::Path;

use banddet::channel::{ChannelKind, NoiseKind};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelChoice {
    BandedRayleigh,
    NearBandedRayleigh,
    Underwater,
    DoublySelective,
    Tdmr,
}

impl ChannelChoice {
    pub fn kind(self) -> ChannelKind {
        match self {
            ChannelChoice::BandedRayleigh => ChannelKind::BandedRayleigh,
            ChannelChoice::NearBandedRayleigh => ChannelKind::NearBandedRayleigh,
            ChannelChoice::Underwater => ChannelKind::Underwater,
            ChannelChoice::DoublySelective => ChannelKind::DoublySelective,
            ChannelChoice::Tdmr => ChannelKind::Tdmr,
        }
    }

    pub fn is_cyclic(self) -> bool {
        matches!(self, ChannelChoice::NearBandedRayleigh | ChannelChoice::DoublySelective)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseChoice {
    Gaussian,
    GaussianMixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchitectureChoice {
    /// 1-D convolutions with zero padding.
    Cnn,
    /// 1-D convolutions whose windows wrap around.
    Ccnn,
    /// 2-D convolutions for grid channels.
    Cnn2d,
    /// Fully connected network tied to `k_train`.
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub name: String,
    pub architecture: ArchitectureChoice,
    pub channel: ChannelChoice,
    pub noise: NoiseChoice,
    /// Frame length `K` used for training (grid columns for TDMR).
    pub k_train: usize,
    pub half_bandwidth: usize,
    /// Grid rows `N` for TDMR; ignored otherwise.
    pub grid_rows: usize,
    /// Normalized maximum Doppler for the doubly selective channel.
    pub max_doppler: f64,
    pub snr_low_db: f64,
    pub snr_high_db: f64,
    /// Training frames per epoch.
    pub samples: usize,
    pub validation_samples: usize,
    /// Frames per gradient step.
    pub minibatch: usize,
    pub max_epochs: usize,
    /// Validations without improvement before stopping.
    pub patience: usize,
    pub validations_per_epoch: usize,
    /// Wall-clock limit on training; 0 means none.
    pub max_train_seconds: f64,
    pub seed: u64,
    pub learning_rate: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    pub depths: Vec<usize>,
    pub mlp_hidden: Vec<usize>,
    pub precision: Precision,
    /// Gradient shards computed in parallel; the sum is taken in shard order.
    pub workers: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            name: "cnn".into(),
            architecture: ArchitectureChoice::Cnn,
            channel: ChannelChoice::BandedRayleigh,
            noise: NoiseChoice::Gaussian,
            k_train: 100,
            half_bandwidth: 1,
            grid_rows: 64,
            max_doppler: 0.0,
            snr_low_db: 5.0,
            snr_high_db: 13.0,
            samples: 200_000,
            validation_samples: 20_000,
            minibatch: 128,
            max_epochs: 100,
            patience: 5,
            validations_per_epoch: 1,
            max_train_seconds: 0.0,
            seed: 1,
            learning_rate: 1e-3,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
            depths: banddet::detector::DEFAULT_DEPTHS.to_vec(),
            mlp_hidden: banddet::detector::DEFAULT_MLP_HIDDEN.to_vec(),
            precision: Precision::F32,
            workers: 1,
        }
    }
}

impl TrainingConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn noise_kind(&self) -> NoiseKind {
        noise_kind(self.channel, self.noise)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        let counts = [
            ("k_train", self.k_train),
            ("samples", self.samples),
            ("validation_samples", self.validation_samples),
            ("minibatch", self.minibatch),
            ("max_epochs", self.max_epochs),
            ("patience", self.patience),
            ("validations_per_epoch", self.validations_per_epoch),
            ("workers", self.workers),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return bad(format!("{name} must be positive"));
        }
        if !(self.snr_low_db.is_finite() && self.snr_high_db.is_finite()) || self.snr_low_db > self.snr_high_db {
            return bad(format!("snr range [{}, {}] is invalid", self.snr_low_db, self.snr_high_db));
        }
        for (name, v) in [("learning_rate", self.learning_rate), ("rmsprop_epsilon", self.rmsprop_epsilon)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(0.0..1.0).contains(&self.rmsprop_decay) {
            return bad("rmsprop_decay must lie in [0, 1)".into());
        }
        if !(self.max_train_seconds >= 0.0) {
            return bad("max_train_seconds must be nonnegative".into());
        }
        if !(self.max_doppler >= 0.0 && self.max_doppler.is_finite()) {
            return bad("max_doppler must be nonnegative".into());
        }
        let layers = match self.architecture {
            ArchitectureChoice::Mlp => &self.mlp_hidden,
            _ => &self.depths,
        };
        if layers.is_empty() || layers.contains(&0) {
            return bad("layer sizes must be a nonempty list of positive integers".into());
        }
        let grid = self.channel == ChannelChoice::Tdmr;
        if grid != (self.architecture == ArchitectureChoice::Cnn2d) {
            return bad("the cnn2d architecture is used exactly with the tdmr channel".into());
        }
        if grid && self.grid_rows == 0 {
            return bad("grid_rows must be positive".into());
        }
        if self.channel.is_cyclic() && self.k_train <= 2 * self.half_bandwidth + 1 {
            return bad(format!("a cyclic channel needs k_train > 2B + 1 = {}", 2 * self.half_bandwidth + 1));
        }
        if self.channel == ChannelChoice::DoublySelective && !self.k_train.is_multiple_of(4) {
            return bad("the doubly selective channel needs k_train divisible by 4".into());
        }
        if self.architecture == ArchitectureChoice::Ccnn && !self.channel.is_cyclic() {
            log::warn!("cyclic padding on a non-cyclic channel");
        }
        Ok(())
    }
}

/// Noise family actually sampled for a channel: the recording channel is real.
pub fn noise_kind(channel: ChannelChoice, noise: NoiseChoice) -> NoiseKind {
    match (channel, noise) {
        (ChannelChoice::Tdmr, _) => NoiseKind::RealGaussian,
        (_, NoiseChoice::Gaussian) => NoiseKind::ComplexGaussian,
        (_, NoiseChoice::GaussianMixture) => NoiseKind::ComplexGaussianMixture,
    }
}
