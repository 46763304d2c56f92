use std::path::Path;

use rayon::prelude::*;

use super::config::{Protocol, TargetMode};
use crate::error::{Error, Result};
use crate::geom::{
    build_features, build_targets, CameraModel, DepthMap, GridAccumulator, GridSpec,
};
use crate::gp::TrainingSet;
use crate::sim::{load_manifest, Manifest, ManifestEntry};

/// A loaded dataset directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    pub dir: std::path::PathBuf,
    pub t_min: f64,
}

impl Dataset {
    /// Loads the manifest and checks the reference temperature. `t_min`, when
    /// given, must match the lowest temperature in the dataset.
    pub fn open(dir: &Path, t_min: Option<f64>) -> Result<Self> {
        let manifest = load_manifest(dir)?;
        let temps = manifest.temperatures();
        let lowest = *temps.first().ok_or_else(|| {
            Error::Contract(format!("dataset in {} has no captures", dir.display()))
        })?;
        if let Some(t) = t_min {
            if (t - lowest).abs() > 0.05 {
                return Err(Error::Contract(format!(
                    "reference temperature {t} C does not match the dataset minimum {lowest} C"
                )));
            }
        }
        Ok(Dataset {
            manifest,
            dir: dir.to_path_buf(),
            t_min: lowest,
        })
    }

    pub fn camera(&self) -> &CameraModel {
        &self.manifest.camera
    }

    pub fn observed(&self, e: &ManifestEntry) -> Result<DepthMap> {
        DepthMap::read_pfm(&self.dir.join(&e.obs))
    }

    pub fn reference(&self, e: &ManifestEntry) -> Result<DepthMap> {
        DepthMap::read_pfm(&self.dir.join(&e.gt))
    }

    /// The map a model in `mode` is trained on and applied to.
    pub fn source(&self, e: &ManifestEntry, mode: TargetMode) -> Result<DepthMap> {
        match mode {
            TargetMode::GtMinusObs => self.observed(e),
            TargetMode::RgbDelta => self.reference(e),
        }
    }

    /// Reference map at `t_min` for the position of `e`.
    pub fn baseline(&self, e: &ManifestEntry) -> Result<DepthMap> {
        let base = self.manifest.find(e.position, self.t_min)?;
        self.reference(base)
    }

    pub fn entries_at(&self, temps: &[f64]) -> Vec<&ManifestEntry> {
        let mut out: Vec<&ManifestEntry> = self
            .manifest
            .entries
            .iter()
            .filter(|e| temps.iter().any(|t| (t - e.temperature).abs() < 0.05))
            .collect();
        out.sort_by(|a, b| {
            a.temperature
                .total_cmp(&b.temperature)
                .then(a.position.total_cmp(&b.position))
        });
        out
    }
}

/// Splits sorted temperature levels into `(train, evaluate)`.
///
/// Hold-out keeps every `k`-th level plus the last one for training, with
/// `k = max(2, round(step / spacing))`, and evaluates the levels in between.
/// The paper protocol trains on everything and evaluates every level above
/// the reference.
pub fn split_temperatures(
    temps: &[f64],
    protocol: Protocol,
    holdout_step: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if temps.len() < 2 {
        return Err(Error::Contract(format!(
            "need at least two temperature levels, dataset has {}",
            temps.len()
        )));
    }
    match protocol {
        Protocol::Paper => Ok((temps.to_vec(), temps[1..].to_vec())),
        Protocol::Holdout => {
            let spacing = temps
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min);
            let stride = ((holdout_step / spacing).round() as usize).max(2);
            let last = temps.len() - 1;
            let (train, eval): (Vec<_>, Vec<_>) = temps
                .iter()
                .enumerate()
                .partition(|(i, _)| i % stride == 0 || *i == last);
            Ok((
                train.into_iter().map(|(_, t)| *t).collect(),
                eval.into_iter().map(|(_, t)| *t).collect(),
            ))
        }
    }
}

/// Adds one capture to a grid: features from `source` at `temp`, targets
/// `reference - source`.
pub fn accumulate_capture(
    acc: &mut GridAccumulator,
    source: &DepthMap,
    reference: &DepthMap,
    temp: f64,
    cam: &CameraModel,
) -> Result<()> {
    let (features, targets) = capture_samples(source, reference, temp, cam)?;
    acc.extend(&features, &targets)
}

fn capture_samples(
    source: &DepthMap,
    reference: &DepthMap,
    temp: f64,
    cam: &CameraModel,
) -> Result<(Vec<crate::gp::FeatureVector>, Vec<f64>)> {
    let target_map = build_targets(reference, source)?;
    let (features, index) = build_features(source, temp, cam)?;
    let targets = index.iter().map(|&(i, j)| target_map.get(i, j)).collect();
    Ok((features, targets))
}

/// Grid-sampled training set over every capture at `temps`. Captures are
/// loaded in parallel one temperature level at a time and folded into the
/// grid in a fixed order.
pub fn build_training_set(
    ds: &Dataset,
    temps: &[f64],
    mode: TargetMode,
    grid: &GridSpec,
) -> Result<TrainingSet> {
    let mut acc = GridAccumulator::new(*grid)?;
    let cam = ds.camera();
    for &t in temps {
        let entries = ds.entries_at(&[t]);
        let samples: Vec<_> = entries
            .par_iter()
            .map(|e| capture_samples(&ds.source(e, mode)?, &ds.baseline(e)?, e.temperature, cam))
            .collect::<Result<_>>()?;
        for (f, y) in &samples {
            acc.extend(f, y)?;
        }
    }
    Ok(acc.finish())
}
