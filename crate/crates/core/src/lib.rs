//! Detection of BPSK symbols over banded and near-banded linear channels.
//!
//! * [`channel`] draws channel realizations and frames.
//! * [`classical`] holds least-squares, banded LMMSE, exhaustive MAP and
//!   local 2-D baselines.
//! * [`nn`] is a small convolutional network engine with reverse-mode
//!   gradients and RMSprop.
//! * [`detector`] assembles the convolutional detectors: input
//!   preprocessing, network construction and output postprocessing.

// `!(x >= 0.0)` style guards are there to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod classical;
pub mod detector;
pub mod linalg;
pub mod nn;
