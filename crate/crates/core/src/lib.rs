//! Detection and segmentation of taan passages in Hindustani khayal vocal
//! recordings.
//!
//! The crate is `no_std` and only needs an allocator. It covers the whole
//! signal chain:
//!
//! - [`dsp`]: Hamming-windowed log spectrograms, FFT, and downsampling.
//! - [`tracks`]: predominant F0, harmonic energy and vocal-activity masks at
//!   a 10 ms hop.
//! - [`features`]: pitch-modulation rate, modulation peak energy and energy
//!   zero-crossing rate at a 1 s frame rate.
//! - [`mlp`] and [`cnn`]: frame classifiers trained by backpropagation.
//! - [`segment`]: posterior self-distance matrix, checkerboard novelty,
//!   boundary picking, majority labelling and section grouping.
//! - [`gmm`]: two-component GMM self-training for frame labels.
//! - [`eval`]: frame metrics, ROC/EER and section matching.
//! - [`synth`]: deterministic synthetic concerts with ground truth.
//!
//! File formats and the command-line tool live in the `taanseg` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cnn;
pub mod config;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod features;
pub mod gmm;
pub mod mlp;
pub mod pipeline;
pub mod segment;
pub mod synth;
pub mod tracks;

pub use error::{Error, Result};

/// Frame class. Posterior pairs are always ordered `(taan, non-taan)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Class {
    Taan,
    NonTaan,
}

impl Class {
    pub const fn index(self) -> usize {
        match self {
            Class::Taan => 0,
            Class::NonTaan => 1,
        }
    }

    pub const fn from_index(i: usize) -> Self {
        if i == 0 {
            Class::Taan
        } else {
            Class::NonTaan
        }
    }

    pub const fn other(self) -> Self {
        match self {
            Class::Taan => Class::NonTaan,
            Class::NonTaan => Class::Taan,
        }
    }
}
