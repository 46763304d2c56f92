//! Deterministic stand-in for a thermal calibration rig: a camera looks at a
//! fronto-parallel plane at several distances while its temperature is
//! stepped. The observed depth is the true plane plus a smooth spatio-thermal
//! drift, per-frame sensor noise and persistent dropout speckles.

mod dataset;
mod noise;
mod rig;
mod synth;

pub use dataset::{
    capture_stem, generate_dataset, load_manifest, Manifest, ManifestEntry, MANIFEST_FILE,
    MANIFEST_VERSION,
};
pub use noise::PixelNoise;
pub use rig::{DriftModel, RigConfig};
pub use synth::{
    mean_depth_map, synth_ground_truth, synth_observed_frame, synth_observed_mean, synth_rgb_depth,
};
