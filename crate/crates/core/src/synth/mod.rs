//! Generators with planted ground truth, and plain reference oracles.

pub mod behavior;
pub mod cohort;
pub mod oracle;
pub mod recording;

pub use behavior::{gen_session, BehaviorProfile, VigilanceProcess};
pub use cohort::{gen_cohort, Cohort, PlantSpec, PlantedFeature};
pub use recording::{gen_recording, RecordingPlant};
