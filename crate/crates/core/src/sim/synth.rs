use super::noise::PixelNoise;
use super::rig::{DriftModel, RigConfig};
use crate::error::{Error, Result};
use crate::geom::{CameraModel, DepthMap};

/// Fronto-parallel plane at `position` meters: every pixel reads `position`.
pub fn synth_ground_truth(position: f64, width: usize, height: usize) -> Result<DepthMap> {
    if !(position > 0.0) || !position.is_finite() {
        return Err(Error::Domain(format!(
            "plane position must be positive, got {position}"
        )));
    }
    Ok(DepthMap::filled(width, height, position))
}

/// Color-derived reference depth: the plane plus the (optional) linear RGB
/// drift.
pub fn synth_rgb_depth(
    position: f64,
    temp: f64,
    drift: &DriftModel,
    width: usize,
    height: usize,
) -> Result<DepthMap> {
    let mut m = synth_ground_truth(position, width, height)?;
    let offset = drift.rgb_delta(position, temp);
    if offset != 0.0 {
        m.data_mut().iter_mut().for_each(|v| *v += offset);
    }
    Ok(m)
}

/// One raw depth frame of the plane at `position` with the sensor at `temp`.
#[allow(clippy::too_many_arguments)]
pub fn synth_observed_frame(
    position: f64,
    temp: f64,
    drift: &DriftModel,
    cam: &CameraModel,
    width: usize,
    height: usize,
    frame_index: u64,
    seed: u64,
) -> Result<DepthMap> {
    render(
        position,
        temp,
        drift,
        cam,
        width,
        height,
        seed,
        |noise, px| drift.noise_std * noise.gaussian(frame_index, px),
    )
}

#[allow(clippy::too_many_arguments)]
fn render<F>(
    position: f64,
    temp: f64,
    drift: &DriftModel,
    cam: &CameraModel,
    width: usize,
    height: usize,
    seed: u64,
    eps: F,
) -> Result<DepthMap>
where
    F: Fn(&PixelNoise, u64) -> f64,
{
    let mut m = synth_ground_truth(position, width, height)?;
    let noise = PixelNoise::new(seed, position, temp);
    for j in 0..height {
        let y = (j as f64 - cam.cy) / cam.fy * position;
        for i in 0..width {
            let px = (j * width + i) as u64;
            if drift.speckle_prob > 0.0 && noise.speckle(px) < drift.speckle_prob {
                m.set(i, j, f64::NAN);
                continue;
            }
            let x = (i as f64 - cam.cx) / cam.fx * position;
            m.set(
                i,
                j,
                position + drift.delta(x, y, position, temp) + eps(&noise, px),
            );
        }
    }
    Ok(m)
}

/// Per-capture mean observed map following `config`: either the average of
/// `frames_per_capture` frames or, with `direct_mean`, a single frame whose
/// noise is pre-divided by `sqrt(frames_per_capture)`.
pub fn synth_observed_mean(
    position: f64,
    temp: f64,
    drift: &DriftModel,
    cam: &CameraModel,
    config: &RigConfig,
) -> Result<DepthMap> {
    let (w, h, seed) = (config.width, config.height, config.rng_seed);
    if config.direct_mean {
        let scale = drift.noise_std / (config.frames_per_capture as f64).sqrt();
        return render(position, temp, drift, cam, w, h, seed, |noise, px| {
            scale * noise.gaussian(0, px)
        });
    }
    let mut acc = MeanAccumulator::new(w, h);
    for f in 0..config.frames_per_capture {
        acc.add(&synth_observed_frame(
            position, temp, drift, cam, w, h, f as u64, seed,
        )?)?;
    }
    Ok(acc.finish())
}

struct MeanAccumulator {
    width: usize,
    height: usize,
    sum: Vec<f64>,
    count: Vec<u32>,
}

impl MeanAccumulator {
    fn new(width: usize, height: usize) -> Self {
        MeanAccumulator {
            width,
            height,
            sum: vec![0.0; width * height],
            count: vec![0; width * height],
        }
    }

    fn add(&mut self, frame: &DepthMap) -> Result<()> {
        if frame.width() != self.width || frame.height() != self.height {
            return Err(Error::Contract("frames differ in size".into()));
        }
        for ((s, c), v) in self.sum.iter_mut().zip(&mut self.count).zip(frame.data()) {
            if !v.is_nan() {
                *s += v;
                *c += 1;
            }
        }
        Ok(())
    }

    fn finish(self) -> DepthMap {
        let data = self
            .sum
            .iter()
            .zip(&self.count)
            .map(|(s, &c)| if c == 0 { f64::NAN } else { s / c as f64 })
            .collect();
        DepthMap::new(self.width, self.height, data).expect("accumulator shape")
    }
}

/// Per-pixel mean over the frames in which the pixel is present.
pub fn mean_depth_map(frames: &[DepthMap]) -> Result<DepthMap> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Contract("cannot average an empty list of frames".into()))?;
    let mut acc = MeanAccumulator::new(first.width(), first.height());
    for f in frames {
        acc.add(f)?;
    }
    Ok(acc.finish())
}
