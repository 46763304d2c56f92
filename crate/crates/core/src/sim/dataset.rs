use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rig::{DriftModel, RigConfig};
use super::synth::{synth_observed_mean, synth_rgb_depth};
use crate::error::{Error, Result};
use crate::geom::CameraModel;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub position: f64,
    pub temperature: f64,
    /// Mean observed depth map, relative to the dataset directory.
    pub obs: String,
    /// Color-derived reference depth map, relative to the dataset directory.
    pub gt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub config: RigConfig,
    pub drift: DriftModel,
    pub camera: CameraModel,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn temperatures(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.entries.iter().map(|e| e.temperature).collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    pub fn positions(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.entries.iter().map(|e| e.position).collect();
        p.sort_by(f64::total_cmp);
        p.dedup();
        p
    }

    /// Entry closest to `(position, temperature)` within half a millimeter and
    /// a twentieth of a degree.
    pub fn find(&self, position: f64, temperature: f64) -> Result<&ManifestEntry> {
        self.entries
            .iter()
            .find(|e| {
                (e.position - position).abs() < 5e-4 && (e.temperature - temperature).abs() < 0.05
            })
            .ok_or_else(|| {
                let keys: Vec<String> = self
                    .entries
                    .iter()
                    .map(|e| format!("({} m, {} C)", e.position, e.temperature))
                    .collect();
                Error::Lookup(format!(
                    "no capture at ({position} m, {temperature} C); available: {}",
                    keys.join(", ")
                ))
            })
    }
}

pub fn capture_stem(position: f64, temperature: f64) -> String {
    format!(
        "p{}_t{}",
        (position * 1000.0).round() as i64,
        (temperature * 10.0).round() as i64
    )
}

/// Runs the capture protocol and writes, per `(position, temperature)`, the
/// mean observed map and the reference map as PFM plus `manifest.json`.
/// Output bytes depend only on the arguments.
pub fn generate_dataset(
    config: &RigConfig,
    drift: &DriftModel,
    cam: &CameraModel,
    out_dir: &Path,
) -> Result<Manifest> {
    config.validate()?;
    cam.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut captures = Vec::new();
    for t in config.temperatures() {
        for &p in &config.positions {
            captures.push((p, t));
        }
    }
    let entries = captures
        .par_iter()
        .map(|&(position, temperature)| {
            let stem = capture_stem(position, temperature);
            let obs = format!("{stem}_obs.pfm");
            let gt = format!("{stem}_gt.pfm");
            let obs_map = synth_observed_mean(position, temperature, drift, cam, config)?;
            obs_map.write_pfm(&out_dir.join(&obs))?;
            let gt_map =
                synth_rgb_depth(position, temperature, drift, config.width, config.height)?;
            gt_map.write_pfm(&out_dir.join(&gt))?;
            Ok(ManifestEntry {
                position,
                temperature,
                obs,
                gt,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = Manifest {
        version: MANIFEST_VERSION,
        seed: config.rng_seed,
        config: config.clone(),
        drift: *drift,
        camera: *cam,
        entries,
    };
    let path = out_dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(&path, e))?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path: PathBuf = dir.join(MANIFEST_FILE);
    let s = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: Manifest = serde_json::from_str(&s).map_err(|e| Error::json(&path, e))?;
    if m.version != MANIFEST_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported manifest version {}",
            path.display(),
            m.version
        )));
    }
    Ok(m)
}
