//! File formats, configuration and the command-line front end of the taan
//! segmentation pipeline. All signal processing lives in `taanseg-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod model;
pub mod report;
pub mod tables;
pub mod textgrid;
pub mod wav;

pub use error::{IoError, Result};
