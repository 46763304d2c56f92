//! Spatio-thermal depth correction for RGB-D cameras.
//!
//! A Gaussian Process over `(x, y, z, temperature)` regresses the per-pixel
//! depth offset between a reference and an observed depth map. The fitted
//! model is evaluated densely to correct whole frames.
//!
//! * [`gp`]: exact GP regression, hyperparameter fitting, model files.
//! * [`geom`]: depth maps, camera geometry, feature/target assembly, metrics.
//! * [`sim`]: deterministic synthetic capture rig.
//! * [`pipeline`]: generate / train / correct / evaluate commands.
//! * [`bench`]: throughput harness for the kernel and the correction pipeline.

pub mod bench;
pub mod error;
pub mod geom;
pub mod gp;
pub mod pipeline;
pub mod sim;

pub use error::{Error, Result};
