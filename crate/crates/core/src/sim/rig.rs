use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Capture protocol: for every temperature level the plane is visited at
/// every position and `frames_per_capture` depth frames are averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RigConfig {
    pub temp_min: f64,
    pub temp_max: f64,
    pub temp_step: f64,
    /// Plane distances in meters, within the sensor's 0.4-1.0 m range.
    pub positions: Vec<f64>,
    pub frames_per_capture: usize,
    pub width: usize,
    pub height: usize,
    pub rng_seed: u64,
    /// Synthesize each capture's mean map as one frame with the noise scaled
    /// by `1/sqrt(frames)` instead of averaging individual frames.
    pub direct_mean: bool,
}

impl Default for RigConfig {
    /// Full protocol: 10-35 C in 1 C steps, six positions 0.4-0.9 m,
    /// 50 frames of 640x480 per capture.
    fn default() -> Self {
        RigConfig {
            temp_min: 10.0,
            temp_max: 35.0,
            temp_step: 1.0,
            positions: (4..=9).map(|k| k as f64 / 10.0).collect(),
            frames_per_capture: 50,
            width: 640,
            height: 480,
            rng_seed: 0x7E4A_CA11,
            direct_mean: false,
        }
    }
}

impl RigConfig {
    /// Reduced protocol that runs in seconds: 5 C steps, four positions,
    /// eight 160x120 frames per capture.
    pub fn desk() -> Self {
        RigConfig {
            temp_step: 5.0,
            positions: vec![0.4, 0.6, 0.8, 1.0],
            frames_per_capture: 8,
            width: 160,
            height: 120,
            ..RigConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite =
            self.temp_min.is_finite() && self.temp_max.is_finite() && self.temp_step.is_finite();
        if !finite || self.temp_min >= self.temp_max {
            return Err(Error::Contract(format!(
                "temperature range must satisfy temp_min < temp_max (got {} .. {})",
                self.temp_min, self.temp_max
            )));
        }
        if !(self.temp_step > 0.0) {
            return Err(Error::Contract(format!(
                "temp_step must be positive, got {}",
                self.temp_step
            )));
        }
        if self.positions.is_empty() {
            return Err(Error::Contract("at least one position is required".into()));
        }
        if let Some(p) = self.positions.iter().find(|p| !(0.4..=1.0).contains(*p)) {
            return Err(Error::Contract(format!(
                "position {p} m outside the 0.4-1.0 m operating range"
            )));
        }
        if self.frames_per_capture == 0 || self.width == 0 || self.height == 0 {
            return Err(Error::Contract(
                "frames_per_capture, width and height must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Temperature levels `temp_min + k * temp_step` up to `temp_max`.
    pub fn temperatures(&self) -> Vec<f64> {
        let count = ((self.temp_max - self.temp_min) / self.temp_step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|k| self.temp_min + k as f64 * self.temp_step)
            .collect()
    }
}

/// Ground-truth drift of the simulated sensor,
/// `delta = (a + b tau + c tau^2) z^2 + d x z + e y z` with `tau = t - t_ref`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    /// Reference temperature for `tau` (the rig's lowest level).
    pub t_ref: f64,
    /// Per-frame depth noise standard deviation (meters).
    pub noise_std: f64,
    /// Fraction of pixels that read as missing.
    pub speckle_prob: f64,
    /// Linear drift of the color-derived reference depth, `k tau z` (off by
    /// default).
    pub rgb_drift: f64,
}

impl Default for DriftModel {
    fn default() -> Self {
        DriftModel {
            a: 0.0,
            b: 4e-4,
            c: 6e-5,
            d: 2e-3,
            e: 1.5e-3,
            t_ref: 10.0,
            noise_std: 1.5e-3,
            speckle_prob: 0.005,
            rgb_drift: 0.0,
        }
    }
}

impl DriftModel {
    /// No drift, no noise, no speckles.
    pub fn zero() -> Self {
        DriftModel {
            a: 0.0,
            b: 0.0,
            c: 0.0,
            d: 0.0,
            e: 0.0,
            noise_std: 0.0,
            speckle_prob: 0.0,
            ..DriftModel::default()
        }
    }

    #[inline]
    pub fn delta(&self, x: f64, y: f64, z: f64, t: f64) -> f64 {
        let tau = t - self.t_ref;
        (self.a + self.b * tau + self.c * tau * tau) * z * z + self.d * x * z + self.e * y * z
    }

    #[inline]
    pub fn rgb_delta(&self, z: f64, t: f64) -> f64 {
        self.rgb_drift * (t - self.t_ref) * z
    }
}
