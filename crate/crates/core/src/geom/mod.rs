//! Camera geometry and map-level plumbing around the GP: reprojection,
//! depth-to-RGB alignment, feature and target assembly, grid sampling,
//! dense correction and Cartesian error metrics.

mod camera;
mod correct;
mod depth_map;
mod grid;
mod metrics;
mod transform;

pub use camera::{CameraModel, Extrinsics};
pub use correct::{correct_depth, correct_depth_with, CorrectOptions, CorrectionResult};
pub use depth_map::{is_valid_depth, DepthMap, MAX_DEPTH};
pub use grid::{grid_sample, GridAccumulator, GridSpec};
pub use metrics::{rmse_xyz, Rmse, RmseAccumulator};
pub use transform::{align_depth_to_rgb, build_features, build_targets, reproject, PixelIndex};
