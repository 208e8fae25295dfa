//! Resting-state EEG: recording I/O, filtering, ocular regression, ICA
//! cleaning and band-power-ratio features.

pub mod eog;
pub mod features;
pub mod filter;
pub mod ica;
pub mod pipeline;
pub mod recording;

pub use features::{BandSet, BpRoiVector, RoiMap, N_BANDS, N_FEATURES, N_ROIS};
pub use pipeline::{extract_features, PipelineConfig, Provenance};
pub use recording::{Recording, RestState};
