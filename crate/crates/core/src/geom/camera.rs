use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rigid transform from this camera's frame into a partner camera's frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrinsics {
    /// Row-major rotation.
    pub r: [[f64; 3]; 3],
    pub t: [f64; 3],
}

impl Extrinsics {
    pub fn identity() -> Self {
        Extrinsics {
            r: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            t: [0.0; 3],
        }
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let r = &self.r;
        [
            r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2] + self.t[0],
            r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2] + self.t[1],
            r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2] + self.t[2],
        ]
    }

    fn validate(&self) -> Result<()> {
        const TOL: f64 = 1e-9;
        let r = &self.r;
        if r.iter().flatten().chain(&self.t).any(|v| !v.is_finite()) {
            return Err(Error::Contract("non-finite extrinsics".into()));
        }
        for a in 0..3 {
            for b in 0..3 {
                let d: f64 = (0..3).map(|k| r[a][k] * r[b][k]).sum();
                let e = if a == b { 1.0 } else { 0.0 };
                if (d - e).abs() > TOL {
                    return Err(Error::Contract(format!(
                        "rotation is not orthonormal: {r:?}"
                    )));
                }
            }
        }
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        if (det - 1.0).abs() > TOL {
            return Err(Error::Contract(format!(
                "rotation determinant {det} is not +1"
            )));
        }
        Ok(())
    }
}

/// Pinhole intrinsics `K = [[fx, 0, cx], [0, fy, cy], [0, 0, 1]]` with
/// optional extrinsics to a partner camera. Lens distortion is assumed to be
/// removed upstream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraFile", into = "CameraFile")]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub extrinsics: Option<Extrinsics>,
}

/// JSON shape: `fx, fy, cx, cy` and optionally `R` (9 numbers, row-major)
/// with `t` (3 numbers).
#[derive(Serialize, Deserialize)]
struct CameraFile {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    r: Option<[f64; 9]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t: Option<[f64; 3]>,
}

impl TryFrom<CameraFile> for CameraModel {
    type Error = Error;

    fn try_from(f: CameraFile) -> Result<Self> {
        let extrinsics = match (f.r, f.t) {
            (None, None) => None,
            (Some(r), t) => Some(Extrinsics {
                r: [[r[0], r[1], r[2]], [r[3], r[4], r[5]], [r[6], r[7], r[8]]],
                t: t.unwrap_or([0.0; 3]),
            }),
            (None, Some(t)) => Some(Extrinsics {
                t,
                ..Extrinsics::identity()
            }),
        };
        let cam = CameraModel {
            fx: f.fx,
            fy: f.fy,
            cx: f.cx,
            cy: f.cy,
            extrinsics,
        };
        cam.validate()?;
        Ok(cam)
    }
}

impl From<CameraModel> for CameraFile {
    fn from(c: CameraModel) -> Self {
        CameraFile {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            r: c.extrinsics.map(|e| {
                let r = e.r;
                [
                    r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
                ]
            }),
            t: c.extrinsics.map(|e| e.t),
        }
    }
}

impl CameraModel {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let cam = CameraModel {
            fx,
            fy,
            cx,
            cy,
            extrinsics: None,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn with_extrinsics(mut self, extrinsics: Extrinsics) -> Result<Self> {
        self.extrinsics = Some(extrinsics);
        self.validate()?;
        Ok(self)
    }

    /// Intrinsics of a 640x480 commodity structured-light sensor, rescaled to
    /// `width` x `height`.
    pub fn default_for_size(width: usize, height: usize) -> Self {
        let sx = width as f64 / 640.0;
        let sy = height as f64 / 480.0;
        CameraModel {
            fx: 570.3 * sx,
            fy: 570.3 * sy,
            cx: (width / 2) as f64,
            cy: (height / 2) as f64,
            extrinsics: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::Contract(format!(
                "focal lengths must be positive (fx = {}, fy = {})",
                self.fx, self.fy
            )));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::Contract("non-finite principal point".into()));
        }
        if let Some(e) = &self.extrinsics {
            e.validate()?;
        }
        Ok(())
    }

    /// `K^-1 [i, j, 1]^T`.
    #[inline]
    pub fn ray(&self, i: f64, j: f64) -> [f64; 3] {
        [(i - self.cx) / self.fx, (j - self.cy) / self.fy, 1.0]
    }

    /// `K p` dehomogenized: returns pixel `(i, j)` of a camera-frame point.
    #[inline]
    pub fn project(&self, p: [f64; 3]) -> (f64, f64) {
        (
            self.fx * p[0] / p[2] + self.cx,
            self.fy * p[1] / p[2] + self.cy,
        )
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Contract(format!("camera JSON: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&s).map_err(|e| Error::json(path, e))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("camera serializes")
    }
}
