use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{CameraModel, GridSpec};
use crate::sim::{DriftModel, RigConfig};

/// How regression targets are formed from a capture at `(p, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// `D_ref(p, t_min) - D_sensor(p, t)`; the sensor map is corrected.
    #[default]
    GtMinusObs,
    /// `D_rgb(p, t_min) - D_rgb(p, t)`; the color-derived map is corrected.
    RgbDelta,
}

impl std::str::FromStr for TargetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gt_minus_obs" | "gt-minus-obs" => Ok(TargetMode::GtMinusObs),
            "rgb_delta" | "rgb-delta" => Ok(TargetMode::RgbDelta),
            other => Err(Error::Contract(format!(
                "unknown target mode {other:?} (expected gt_minus_obs or rgb_delta)"
            ))),
        }
    }
}

/// Which captures are used for training and which are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Train on a temperature subsample, score only the levels in between.
    #[default]
    Holdout,
    /// Train on every capture, score every capture except the reference
    /// temperature (in-sample).
    Paper,
}

/// Constant prior mean of the GP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeanMode {
    #[default]
    Zero,
    TargetMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    pub enabled: bool,
    pub max_iters: usize,
    pub tol: f64,
    /// Hyperparameters are tuned on an evenly strided subset of at most this
    /// many grid samples; the final model is fitted on all of them.
    pub max_points: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            enabled: true,
            max_iters: 150,
            tol: 1e-5,
            max_points: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub dataset_dir: PathBuf,
    pub model_path: PathBuf,
    pub report_path: PathBuf,
    /// Where `correct` writes its maps.
    pub output_dir: PathBuf,
    pub target_mode: TargetMode,
    pub protocol: Protocol,
    /// Spacing of the training temperatures under the hold-out protocol.
    pub holdout_step: f64,
    pub grid: GridSpec,
    pub optimizer: OptimizerSettings,
    pub mean: MeanMode,
    pub chunk: usize,
    /// Reference temperature; must equal the dataset's lowest level when set.
    pub t_min: Option<f64>,
    pub rig: RigConfig,
    pub drift: DriftModel,
    /// Camera used by `generate`; defaults to a generic sensor scaled to the
    /// rig resolution.
    pub camera: Option<CameraModel>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dataset_dir: PathBuf::from("data"),
            model_path: PathBuf::from("model.tgp"),
            report_path: PathBuf::from("report.json"),
            output_dir: PathBuf::from("corrected"),
            target_mode: TargetMode::default(),
            protocol: Protocol::default(),
            holdout_step: 3.0,
            grid: GridSpec::default(),
            optimizer: OptimizerSettings::default(),
            mean: MeanMode::default(),
            chunk: 4096,
            t_min: None,
            rig: RigConfig::desk(),
            drift: DriftModel::default(),
            camera: None,
        }
    }
}

impl PipelineConfig {
    /// Desk-scale setup rooted at `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        PipelineConfig {
            dataset_dir: dir.join("data"),
            model_path: dir.join("model.tgp"),
            report_path: dir.join("report.json"),
            output_dir: dir.join("corrected"),
            ..PipelineConfig::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&s).map_err(|e| Error::json(path, e))
    }

    pub fn camera(&self) -> CameraModel {
        self.camera
            .unwrap_or_else(|| CameraModel::default_for_size(self.rig.width, self.rig.height))
    }

    pub fn validate(&self) -> Result<()> {
        if self.chunk == 0 {
            return Err(Error::Contract("chunk must be at least 1".into()));
        }
        if !(self.holdout_step > 0.0) {
            return Err(Error::Contract("holdout_step must be positive".into()));
        }
        self.grid.validate()
    }
}
