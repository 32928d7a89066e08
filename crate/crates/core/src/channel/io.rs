//! Frame batch persistence.
//!
//! Binary container layout (all integers and floats little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "BDFR"
//! 4       2     version (u16) = 1
//! 6       1     layout (u8): 0 = vector frames, complex receives
//!                            1 = grid frames, real receives
//! 7       1     reserved, 0
//! 8       4     rows (u32), 1 for vector frames
//! 12      4     cols (u32), K
//! 16      8     frame count (u64)
//! 24      ...   frames
//! ```
//!
//! Each frame is `snr_db (f64)`, `sigma2 (f64)`, the receives
//! (`rows * cols` interleaved `re, im` f64 pairs for vector frames, or
//! `rows * cols` f64 for grid frames, row-major), then `rows * cols` symbols
//! as signed bytes.

use std::io::{self, Read, Write};

use num_complex::Complex64;
use thiserror::Error;

use super::{Frame, GridFrame};

pub const FRAME_MAGIC: &[u8; 4] = b"BDFR";
pub const FRAME_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum FrameIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a frame container (bad magic)")]
    BadMagic,
    #[error("unsupported frame container version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown frame layout tag {0}")]
    UnknownLayout(u8),
    #[error("frames in a batch must share dimensions")]
    InconsistentDimensions,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrameBatch {
    Vector(Vec<Frame>),
    Grid(Vec<GridFrame>),
}

impl FrameBatch {
    pub fn len(&self) -> usize {
        match self {
            FrameBatch::Vector(f) => f.len(),
            FrameBatch::Grid(f) => f.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dims(&self) -> Result<(u8, usize, usize), FrameIoError> {
        match self {
            FrameBatch::Vector(frames) => {
                let cols = frames.first().map_or(0, |f| f.y.len());
                if frames.iter().any(|f| f.y.len() != cols || f.x.len() != cols) {
                    return Err(FrameIoError::InconsistentDimensions);
                }
                Ok((0, 1, cols))
            }
            FrameBatch::Grid(frames) => {
                let (rows, cols) = frames.first().map_or((0, 0), |f| (f.rows, f.cols));
                if frames
                    .iter()
                    .any(|f| f.rows != rows || f.cols != cols || f.y.len() != rows * cols || f.x.len() != rows * cols)
                {
                    return Err(FrameIoError::InconsistentDimensions);
                }
                Ok((1, rows, cols))
            }
        }
    }
}

pub fn write_frames<W: Write>(mut w: W, batch: &FrameBatch) -> Result<(), FrameIoError> {
    let (layout, rows, cols) = batch.dims()?;
    w.write_all(FRAME_MAGIC)?;
    w.write_all(&FRAME_VERSION.to_le_bytes())?;
    w.write_all(&[layout, 0])?;
    w.write_all(&(rows as u32).to_le_bytes())?;
    w.write_all(&(cols as u32).to_le_bytes())?;
    w.write_all(&(batch.len() as u64).to_le_bytes())?;
    let symbols = |x: &[i8]| x.iter().map(|&s| s as u8).collect::<Vec<u8>>();
    match batch {
        FrameBatch::Vector(frames) => {
            for f in frames {
                w.write_all(&f.snr_db.to_le_bytes())?;
                w.write_all(&f.sigma2.to_le_bytes())?;
                for y in &f.y {
                    w.write_all(&y.re.to_le_bytes())?;
                    w.write_all(&y.im.to_le_bytes())?;
                }
                w.write_all(&symbols(&f.x))?;
            }
        }
        FrameBatch::Grid(frames) => {
            for f in frames {
                w.write_all(&f.snr_db.to_le_bytes())?;
                w.write_all(&f.sigma2.to_le_bytes())?;
                for y in &f.y {
                    w.write_all(&y.to_le_bytes())?;
                }
                w.write_all(&symbols(&f.x))?;
            }
        }
    }
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> io::Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

fn read_symbols<R: Read>(r: &mut R, n: usize) -> io::Result<Vec<i8>> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    Ok(buf.into_iter().map(|b| b as i8).collect())
}

pub fn read_frames<R: Read>(mut r: R) -> Result<FrameBatch, FrameIoError> {
    if &read_array::<4, _>(&mut r)? != FRAME_MAGIC {
        return Err(FrameIoError::BadMagic);
    }
    let version = u16::from_le_bytes(read_array(&mut r)?);
    if version != FRAME_VERSION {
        return Err(FrameIoError::UnsupportedVersion(version));
    }
    let [layout, _] = read_array::<2, _>(&mut r)?;
    let rows = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let cols = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let count = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let n = rows * cols;
    match layout {
        0 => {
            let mut frames = Vec::with_capacity(count);
            for _ in 0..count {
                let snr_db = read_f64(&mut r)?;
                let sigma2 = read_f64(&mut r)?;
                let y = (0..n)
                    .map(|_| Ok(Complex64::new(read_f64(&mut r)?, read_f64(&mut r)?)))
                    .collect::<io::Result<Vec<_>>>()?;
                let x = read_symbols(&mut r, n)?;
                frames.push(Frame { x, y, snr_db, sigma2 });
            }
            Ok(FrameBatch::Vector(frames))
        }
        1 => {
            let mut frames = Vec::with_capacity(count);
            for _ in 0..count {
                let snr_db = read_f64(&mut r)?;
                let sigma2 = read_f64(&mut r)?;
                let y = (0..n).map(|_| read_f64(&mut r)).collect::<io::Result<Vec<_>>>()?;
                let x = read_symbols(&mut r, n)?;
                frames.push(GridFrame { rows, cols, x, y, snr_db, sigma2 });
            }
            Ok(FrameBatch::Grid(frames))
        }
        other => Err(FrameIoError::UnknownLayout(other)),
    }
}

/// Debug dump of one frame with columns `k, re_y, im_y, x`.
pub fn write_frame_csv<W: Write>(w: W, frame: &Frame) -> Result<(), FrameIoError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "re_y", "im_y", "x"])?;
    for (k, (y, x)) in frame.y.iter().zip(&frame.x).enumerate() {
        out.write_record([k.to_string(), y.re.to_string(), y.im.to_string(), x.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{
        draw_banded_rayleigh, draw_tdmr_channel, random_symbols, substream, transmit, transmit_grid, NoiseKind,
        NoiseModel,
    };
    use proptest::prelude::*;

    fn vector_batch(seed: u64, k: usize, count: usize) -> FrameBatch {
        let mut rng = substream(seed, 0);
        let noise = NoiseModel::from_snr(NoiseKind::ComplexGaussian, 9.0, 3.0);
        FrameBatch::Vector(
            (0..count)
                .map(|_| {
                    let ch = draw_banded_rayleigh(k, 1, &mut rng).unwrap();
                    let x = random_symbols(k, &mut rng);
                    transmit(&ch, &x, &noise, &mut rng).unwrap()
                })
                .collect(),
        )
    }

    proptest! {
        #[test]
        fn vector_round_trip(seed in any::<u64>(), k in 1usize..12, count in 0usize..4) {
            let batch = vector_batch(seed, k, count);
            let mut bytes = Vec::new();
            write_frames(&mut bytes, &batch).unwrap();
            prop_assert_eq!(bytes.len(), 24 + count * (16 + 16 * k + k));
            prop_assert_eq!(read_frames(bytes.as_slice()).unwrap(), batch);
        }
    }

    #[test]
    fn grid_round_trip() {
        let mut rng = substream(51, 0);
        let ch = draw_tdmr_channel(3, 4, 1, &mut rng).unwrap();
        let noise = NoiseModel::from_snr(NoiseKind::RealGaussian, 11.0, 4.0);
        let frames: Vec<GridFrame> = (0..2)
            .map(|_| {
                let x = random_symbols(12, &mut rng);
                transmit_grid(&ch, &x, &noise, &mut rng).unwrap()
            })
            .collect();
        let batch = FrameBatch::Grid(frames);
        let mut bytes = Vec::new();
        write_frames(&mut bytes, &batch).unwrap();
        assert_eq!(&bytes[..4], b"BDFR");
        assert_eq!(bytes[6], 1);
        assert_eq!(read_frames(bytes.as_slice()).unwrap(), batch);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(read_frames(&b"XXXX\x01\x00"[..]), Err(FrameIoError::BadMagic)));
        assert!(matches!(read_frames(&b"BDFR\x07\x00"[..]), Err(FrameIoError::UnsupportedVersion(7))));
    }

    #[test]
    fn csv_dump() {
        let FrameBatch::Vector(frames) = vector_batch(52, 3, 1) else { unreachable!() };
        let mut out = Vec::new();
        write_frame_csv(&mut out, &frames[0]).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,re_y,im_y,x");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,"));
    }
}
