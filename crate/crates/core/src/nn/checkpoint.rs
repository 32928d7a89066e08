//! Network checkpoints.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "BDNN"
//! 4       2     version (u16) = 1
//! 6       2     layer count L (u16)
//! 8       20*L  layer descriptors
//! ...           parameters, f64, layer by layer: w (row-major), b, then v if present
//! ```
//!
//! A layer descriptor is `tag (u8)`, `activation (u8)`, `padding (u8)`,
//! `reserved (u8) = 0`, then four `u32` dimensions:
//!
//! | tag | layer  | d0       | d1            | d2        | d3                   |
//! |-----|--------|----------|---------------|-----------|----------------------|
//! | 1   | conv1d | in_block | window_blocks | out_depth | 0                    |
//! | 2   | conv2d | in_depth | radius        | out_depth | side_dim (0 if none) |
//! | 3   | dense  | in_dim   | out_dim       | 0         | 0                    |
//!
//! Activation codes: 0 ReLU, 1 sigmoid. Padding codes: 0 zero, 1 cyclic
//! (written as 0 for layers without padding). Parameters are always stored
//! in 64-bit precision regardless of the in-memory scalar type.

use std::io::{self, Read, Write};

use thiserror::Error;

use super::{Activation, BlockConv1d, Conv2d, Dense, Layer, Network, NnError, Padding, Scalar};

pub const NETWORK_MAGIC: &[u8; 4] = b"BDNN";
pub const NETWORK_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a network checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown {what} code {code}")]
    UnknownCode { what: &'static str, code: u8 },
    #[error(transparent)]
    Invalid(#[from] NnError),
}

fn activation_code(a: Activation) -> u8 {
    match a {
        Activation::Relu => 0,
        Activation::Sigmoid => 1,
    }
}

fn padding_code(p: Padding) -> u8 {
    match p {
        Padding::Zero => 0,
        Padding::Cyclic => 1,
    }
}

pub fn save_network<W: Write, S: Scalar>(mut w: W, network: &Network<S>) -> Result<(), CheckpointError> {
    w.write_all(NETWORK_MAGIC)?;
    w.write_all(&NETWORK_VERSION.to_le_bytes())?;
    let count =
        u16::try_from(network.layers().len()).map_err(|_| NnError::InvalidArchitecture("too many layers".into()))?;
    w.write_all(&count.to_le_bytes())?;
    for layer in network.layers() {
        let (tag, pad, dims) = match layer {
            Layer::Conv1d(l) => (1u8, padding_code(l.padding), [l.in_block, l.window_blocks, l.out_depth, 0]),
            Layer::Conv2d(l) => (2, 0, [l.in_depth, l.radius, l.out_depth, l.side_dim.unwrap_or(0)]),
            Layer::Dense(l) => (3, 0, [l.in_dim, l.out_dim, 0, 0]),
        };
        w.write_all(&[tag, activation_code(layer.activation()), pad, 0])?;
        for d in dims {
            let d = u32::try_from(d).map_err(|_| NnError::InvalidArchitecture("dimension overflows u32".into()))?;
            w.write_all(&d.to_le_bytes())?;
        }
    }
    for layer in network.layers() {
        for block in layer.params().slices() {
            for &x in block {
                w.write_all(&x.into_f64().to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn read_bytes<const N: usize, R: Read>(r: &mut R) -> io::Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn load_network<R: Read, S: Scalar>(mut r: R) -> Result<Network<S>, CheckpointError> {
    if &read_bytes::<4, _>(&mut r)? != NETWORK_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u16::from_le_bytes(read_bytes(&mut r)?);
    if version != NETWORK_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let count = u16::from_le_bytes(read_bytes(&mut r)?);
    let mut layers = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let [tag, act, pad, _] = read_bytes::<4, _>(&mut r)?;
        let mut d = [0usize; 4];
        for x in &mut d {
            *x = u32::from_le_bytes(read_bytes(&mut r)?) as usize;
        }
        let activation = match act {
            0 => Activation::Relu,
            1 => Activation::Sigmoid,
            code => return Err(CheckpointError::UnknownCode { what: "activation", code }),
        };
        let layer = match tag {
            1 => {
                let padding = match pad {
                    0 => Padding::Zero,
                    1 => Padding::Cyclic,
                    code => return Err(CheckpointError::UnknownCode { what: "padding", code }),
                };
                Layer::Conv1d(BlockConv1d::new(d[0], d[1], d[2], padding, activation)?)
            }
            2 => Layer::Conv2d(Conv2d::new(d[0], d[1], d[2], (d[3] > 0).then_some(d[3]), activation)?),
            3 => Layer::Dense(Dense::new(d[0], d[1], activation)?),
            code => return Err(CheckpointError::UnknownCode { what: "layer", code }),
        };
        layers.push(layer);
    }
    let mut network = Network::new(layers)?;
    for layer in network.layers_mut() {
        for block in layer.params_mut().slices_mut() {
            for x in block.iter_mut() {
                *x = S::from_f64(f64::from_le_bytes(read_bytes(&mut r)?));
            }
        }
    }
    Ok(network)
}
