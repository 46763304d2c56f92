use serde::{Deserialize, Serialize};

use super::camera::CameraModel;
use super::depth_map::{is_valid_depth, DepthMap};
use crate::error::{Error, Result};

/// Per-axis root-mean-square error in millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rmse {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Pools squared Cartesian differences over any number of map pairs.
#[derive(Debug, Clone, Copy, Default)]
pub struct RmseAccumulator {
    sum_sq: [f64; 3],
    count: u64,
}

impl RmseAccumulator {
    /// Adds every pixel valid in both maps. Both depths are reprojected
    /// through the same pixel ray, so the difference is `(a - b) K^-1 h`.
    pub fn add_maps(&mut self, a: &DepthMap, b: &DepthMap, cam: &CameraModel) -> Result<()> {
        a.check_same_shape(b)?;
        for j in 0..a.height() {
            for i in 0..a.width() {
                let (da, db) = (a.get(i, j), b.get(i, j));
                if !(is_valid_depth(da) && is_valid_depth(db)) {
                    continue;
                }
                let ray = cam.ray(i as f64, j as f64);
                let dd = da - db;
                for k in 0..3 {
                    let e = dd * ray[k];
                    self.sum_sq[k] += e * e;
                }
                self.count += 1;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &RmseAccumulator) {
        for k in 0..3 {
            self.sum_sq[k] += other.sum_sq[k];
        }
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(&self) -> Result<Rmse> {
        if self.count == 0 {
            return Err(Error::UndefinedMetric(
                "no pixel is valid in both depth maps".into(),
            ));
        }
        let n = self.count as f64;
        let r = |k: usize| 1e3 * (self.sum_sq[k] / n).sqrt();
        Ok(Rmse {
            x: r(0),
            y: r(1),
            z: r(2),
        })
    }
}

/// Cartesian RMSE between two depth maps of the same view, in millimeters.
pub fn rmse_xyz(a: &DepthMap, b: &DepthMap, cam: &CameraModel) -> Result<Rmse> {
    let mut acc = RmseAccumulator::default();
    acc.add_maps(a, b, cam)?;
    acc.finish()
}
