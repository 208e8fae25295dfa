//! Vigilance scoring from SART event logs, resting-state EEG features, and
//! cross-validated relevance analysis linking the two.

pub mod eeg;
pub mod error;
pub mod nn;
pub mod relevance;
pub mod report;
pub mod scoring;
pub mod seed;
pub mod session;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
