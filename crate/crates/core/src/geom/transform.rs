use super::camera::CameraModel;
use super::depth_map::{is_valid_depth, DepthMap};
use crate::error::{Error, Result};
use crate::gp::FeatureVector;

/// Pixel coordinates `(i, j)`: column, row.
pub type PixelIndex = (usize, usize);

/// Back-projects pixel `(i, j)` at depth `d` to the camera frame,
/// `d K^-1 [i, j, 1]^T`. The third component equals `d`.
pub fn reproject(i: f64, j: f64, d: f64, cam: &CameraModel) -> Result<[f64; 3]> {
    if !(d > 0.0) || !d.is_finite() || !i.is_finite() || !j.is_finite() {
        return Err(Error::Domain(format!(
            "cannot reproject pixel ({i}, {j}) at depth {d}"
        )));
    }
    Ok(reproject_unchecked(i, j, d, cam))
}

#[inline]
pub(crate) fn reproject_unchecked(i: f64, j: f64, d: f64, cam: &CameraModel) -> [f64; 3] {
    let r = cam.ray(i, j);
    [d * r[0], d * r[1], d]
}

/// Re-renders a depth map into the partner camera described by `ir_cam`'s
/// extrinsics and `rgb_cam`'s intrinsics. The output has the input's size.
/// Target pixels are the rounded dehomogenized projections; when several
/// source pixels land on one target the nearest depth wins, and targets that
/// nothing lands on stay missing.
pub fn align_depth_to_rgb(
    depth: &DepthMap,
    ir_cam: &CameraModel,
    rgb_cam: &CameraModel,
) -> Result<DepthMap> {
    let ext = ir_cam.extrinsics.ok_or_else(|| {
        Error::Contract("depth camera has no extrinsics to the RGB camera".into())
    })?;
    let (w, h) = (depth.width(), depth.height());
    let mut out = DepthMap::missing(w, h);
    for j in 0..h {
        for i in 0..w {
            let d = depth.get(i, j);
            if !is_valid_depth(d) {
                continue;
            }
            let p = ext.apply(reproject_unchecked(i as f64, j as f64, d, ir_cam));
            let z = p[2];
            if !(z > 0.0) {
                continue;
            }
            let (u, v) = rgb_cam.project(p);
            let (u, v) = (u.round(), v.round());
            if u < 0.0 || v < 0.0 || u >= w as f64 || v >= h as f64 {
                continue;
            }
            let (u, v) = (u as usize, v as usize);
            let cur = out.get(u, v);
            if cur.is_nan() || z < cur {
                out.set(u, v, z);
            }
        }
    }
    Ok(out)
}

/// One `[x, y, z, t]` row per valid pixel (row-major scan order) plus the
/// pixel each row came from.
pub fn build_features(
    depth: &DepthMap,
    temp: f64,
    cam: &CameraModel,
) -> Result<(Vec<FeatureVector>, Vec<PixelIndex>)> {
    if !temp.is_finite() {
        return Err(Error::Domain(format!("non-finite temperature {temp}")));
    }
    let mut feats = Vec::with_capacity(depth.valid_count());
    let mut index = Vec::with_capacity(feats.capacity());
    for j in 0..depth.height() {
        for i in 0..depth.width() {
            let d = depth.get(i, j);
            if is_valid_depth(d) {
                let [x, y, z] = reproject_unchecked(i as f64, j as f64, d, cam);
                feats.push([x, y, z, temp]);
                index.push((i, j));
            }
        }
    }
    Ok((feats, index))
}

/// Per-pixel `gt - obs`; missing where either side is missing.
pub fn build_targets(gt: &DepthMap, obs: &DepthMap) -> Result<DepthMap> {
    gt.check_same_shape(obs)?;
    let data = gt
        .data()
        .iter()
        .zip(obs.data())
        .map(|(&g, &o)| {
            if is_valid_depth(g) && is_valid_depth(o) {
                g - o
            } else {
                f64::NAN
            }
        })
        .collect();
    DepthMap::new(gt.width(), gt.height(), data)
}
