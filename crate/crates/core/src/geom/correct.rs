use rayon::prelude::*;

use super::camera::CameraModel;
use super::depth_map::DepthMap;
use super::transform::build_features;
use crate::error::{Error, Result};
use crate::gp::FittedGp;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectOptions {
    /// Queries per prediction batch.
    pub chunk: usize,
    /// Also compute the posterior variance map. This costs `O(N^2)` per pixel
    /// instead of `O(N)`.
    pub confidence: bool,
}

impl Default for CorrectOptions {
    fn default() -> Self {
        CorrectOptions {
            chunk: 4096,
            confidence: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionResult {
    pub corrected: DepthMap,
    /// Applied per-pixel offset (meters).
    pub delta: DepthMap,
    /// Posterior variance (meters^2), when requested.
    pub confidence: Option<DepthMap>,
}

/// `D*(i, j) = D(i, j) + G(x_ij)`, with the variance map.
pub fn correct_depth(
    depth: &DepthMap,
    temp: f64,
    gp: &FittedGp,
    cam: &CameraModel,
    chunk: usize,
) -> Result<CorrectionResult> {
    correct_depth_with(
        depth,
        temp,
        gp,
        cam,
        &CorrectOptions {
            chunk,
            confidence: true,
        },
    )
}

pub fn correct_depth_with(
    depth: &DepthMap,
    temp: f64,
    gp: &FittedGp,
    cam: &CameraModel,
    opts: &CorrectOptions,
) -> Result<CorrectionResult> {
    if opts.chunk == 0 {
        return Err(Error::Contract("chunk size must be at least 1".into()));
    }
    let (features, index) = build_features(depth, temp, cam)?;
    let with_var = opts.confidence;
    let predicted: Vec<(f64, f64)> = features
        .par_chunks(opts.chunk)
        .flat_map_iter(|chunk| {
            if with_var {
                let mut out = Vec::with_capacity(chunk.len());
                gp.mean_var_into(chunk, &mut out);
                out
            } else {
                chunk.iter().map(|q| (gp.mean_at(q), f64::NAN)).collect()
            }
        })
        .collect();

    let (w, h) = (depth.width(), depth.height());
    let mut corrected = DepthMap::missing(w, h);
    let mut delta = DepthMap::missing(w, h);
    let mut confidence = with_var.then(|| DepthMap::missing(w, h));
    for (&(i, j), &(mean, var)) in index.iter().zip(&predicted) {
        delta.set(i, j, mean);
        corrected.set(i, j, depth.get(i, j) + mean);
        if let Some(c) = confidence.as_mut() {
            c.set(i, j, var);
        }
    }
    Ok(CorrectionResult {
        corrected,
        delta,
        confidence,
    })
}
