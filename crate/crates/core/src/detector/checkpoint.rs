//! Detector checkpoints: a 16-byte header followed by a network checkpoint.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "BDCD"
//! 4       2     version (u16) = 1
//! 6       4     B (u32)
//! 10      1     padding: 0 zero, 1 cyclic
//! 11      1     dimensionality: 1 or 2
//! 12      1     architecture: 0 convolutional, 1 fully connected
//! 13      1     reserved, 0
//! 14      2     preprocessing version (u16)
//! 16      ...   network checkpoint ("BDNN")
//! ```
//!
//! Nothing in the file depends on the system size `K` for convolutional
//! detectors.

use std::io::{Read, Write};

use super::{Architecture, DetectorError, Dimensionality, NeuralDetector, PREPROCESS_VERSION};
use crate::nn::{load_network, save_network, CheckpointError, Padding, Scalar};

pub const DETECTOR_MAGIC: &[u8; 4] = b"BDCD";
pub const DETECTOR_VERSION: u16 = 1;

pub fn save_detector<W: Write, S: Scalar>(mut w: W, detector: &NeuralDetector<S>) -> Result<(), DetectorError> {
    let b = u32::try_from(detector.half_bandwidth)
        .map_err(|_| DetectorError::InvalidSpec("bandwidth overflows u32".into()))?;
    let padding = match detector.padding() {
        Padding::Zero => 0u8,
        Padding::Cyclic => 1,
    };
    let dim = match detector.dimensionality {
        Dimensionality::OneD => 1u8,
        Dimensionality::TwoD => 2,
    };
    let arch = match detector.architecture {
        Architecture::Convolutional => 0u8,
        Architecture::FullyConnected => 1,
    };
    let mut header = Vec::with_capacity(16);
    header.extend_from_slice(DETECTOR_MAGIC);
    header.extend_from_slice(&DETECTOR_VERSION.to_le_bytes());
    header.extend_from_slice(&b.to_le_bytes());
    header.extend_from_slice(&[padding, dim, arch, 0]);
    header.extend_from_slice(&PREPROCESS_VERSION.to_le_bytes());
    w.write_all(&header).map_err(CheckpointError::from)?;
    save_network(w, &detector.network)?;
    Ok(())
}

pub fn load_detector<R: Read, S: Scalar>(mut r: R) -> Result<NeuralDetector<S>, DetectorError> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header).map_err(CheckpointError::from)?;
    if &header[..4] != DETECTOR_MAGIC {
        return Err(CheckpointError::BadMagic.into());
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != DETECTOR_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version).into());
    }
    let half_bandwidth = u32::from_le_bytes([header[6], header[7], header[8], header[9]]) as usize;
    let padding = match header[10] {
        0 => Padding::Zero,
        1 => Padding::Cyclic,
        code => return Err(CheckpointError::UnknownCode { what: "padding", code }.into()),
    };
    let dimensionality = match header[11] {
        1 => Dimensionality::OneD,
        2 => Dimensionality::TwoD,
        code => return Err(CheckpointError::UnknownCode { what: "dimensionality", code }.into()),
    };
    let architecture = match header[12] {
        0 => Architecture::Convolutional,
        1 => Architecture::FullyConnected,
        code => return Err(CheckpointError::UnknownCode { what: "architecture", code }.into()),
    };
    let pre = u16::from_le_bytes([header[14], header[15]]);
    if pre != PREPROCESS_VERSION {
        return Err(DetectorError::InvalidSpec(format!("unsupported preprocessing version {pre}")));
    }
    let network = load_network(r)?;
    let detector = NeuralDetector { half_bandwidth, dimensionality, architecture, network };
    if detector.padding() != padding {
        return Err(DetectorError::InvalidSpec("header padding disagrees with the network".into()));
    }
    Ok(detector)
}
