//! Exact Gaussian Process Regression over 4D spatio-thermal features.
//!
//! The covariance is the squared-exponential kernel with a diagonal input
//! scaling `W`, signal variance `sigma_s^2` and i.i.d. noise `sigma_y^2`
//! added on the diagonal of the training Gram matrix. Fitting factors the
//! Gram matrix once (`Sigma = L L^T`); prediction reuses the factor and the
//! weight vector `alpha = Sigma^-1 (y - m)`.

mod cholesky;
mod exp;
mod kernel;
mod likelihood;
mod model;
mod optimize;
mod serialize;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cholesky::{cholesky_packed, packed_index, solve_lower_in_place, PackedLower};
pub use exp::exp_nonpositive;
pub use kernel::{cross_kernel_fast, cross_kernel_naive, gram_naive, kernel_eval, ScaledPoints};
pub use likelihood::{nlml, nlml_grad};
pub use model::{fit, fit_with_jitter, FittedGp, Prediction, JITTER_LADDER};
pub use optimize::{optimize_hyper, OptimizeOptions, OptimizeOutcome};
pub use serialize::{decode_model, encode_model, read_model, write_model, MODEL_MAGIC};

/// Input dimensionality: reprojected `(x, y, z)` in meters plus temperature
/// in degrees Celsius.
pub const DIM: usize = 4;

/// One spatio-thermal input `[x, y, z, t]`.
pub type FeatureVector = [f64; DIM];

/// Kernel hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Diagonal of the input scaling matrix `W` (1 / unit^2).
    pub w: [f64; DIM],
    /// Signal standard deviation (meters).
    pub sigma_s: f64,
    /// Noise standard deviation (meters).
    pub sigma_y: f64,
}

impl Hyperparams {
    pub fn new(w: [f64; DIM], sigma_s: f64, sigma_y: f64) -> Result<Self> {
        let h = Hyperparams {
            w,
            sigma_s,
            sigma_y,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.w.iter().all(|v| v.is_finite())
            && self.sigma_s.is_finite()
            && self.sigma_y.is_finite();
        if !finite {
            return Err(Error::Domain(format!(
                "non-finite hyperparameters {self:?}"
            )));
        }
        if self.w.iter().any(|&v| v < 0.0) {
            return Err(Error::Domain(format!(
                "negative length-scale weight in {:?}",
                self.w
            )));
        }
        if self.sigma_s <= 0.0 || self.sigma_y <= 0.0 {
            return Err(Error::Domain(format!(
                "sigma_s and sigma_y must be positive (got {}, {})",
                self.sigma_s, self.sigma_y
            )));
        }
        Ok(())
    }

    pub fn signal_var(&self) -> f64 {
        self.sigma_s * self.sigma_s
    }

    pub fn noise_var(&self) -> f64 {
        self.sigma_y * self.sigma_y
    }

    /// Prior variance of a single observation, `sigma_s^2 + sigma_y^2`.
    pub fn prior_var(&self) -> f64 {
        self.signal_var() + self.noise_var()
    }

    /// Log-space parameter vector `ln(w0..w3, sigma_s^2, sigma_y^2)`.
    pub fn to_log(&self) -> [f64; 6] {
        [
            self.w[0].ln(),
            self.w[1].ln(),
            self.w[2].ln(),
            self.w[3].ln(),
            self.signal_var().ln(),
            self.noise_var().ln(),
        ]
    }

    pub fn from_log(theta: &[f64; 6]) -> Self {
        Hyperparams {
            w: [
                theta[0].exp(),
                theta[1].exp(),
                theta[2].exp(),
                theta[3].exp(),
            ],
            sigma_s: (0.5 * theta[4]).exp(),
            sigma_y: (0.5 * theta[5]).exp(),
        }
    }
}

/// Training inputs and depth-delta targets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingSet {
    pub x: Vec<FeatureVector>,
    pub y: Vec<f64>,
}

impl TrainingSet {
    pub fn new(x: Vec<FeatureVector>, y: Vec<f64>) -> Result<Self> {
        let set = TrainingSet { x, y };
        set.validate()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.is_empty() {
            return Err(Error::Contract("training set is empty".into()));
        }
        if self.x.len() != self.y.len() {
            return Err(Error::Contract(format!(
                "training set has {} inputs but {} targets",
                self.x.len(),
                self.y.len()
            )));
        }
        check_rows_finite(&self.x)?;
        if let Some(i) = self.y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite target at row {i}")));
        }
        Ok(())
    }

    pub fn target_mean(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.y.len().max(1) as f64
    }

    /// Deterministic stride subsample keeping at most `max_len` rows.
    pub fn subsample(&self, max_len: usize) -> TrainingSet {
        if self.len() <= max_len || max_len == 0 {
            return self.clone();
        }
        let n = self.len();
        let idx = (0..max_len).map(|k| k * n / max_len);
        let (x, y) = idx.map(|i| (self.x[i], self.y[i])).unzip();
        TrainingSet { x, y }
    }
}

/// Dense row-major matrix, used for kernel blocks that are small enough to
/// materialize.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }
}

pub(crate) fn check_rows_finite(rows: &[FeatureVector]) -> Result<()> {
    match rows.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
        Some(i) => Err(Error::Domain(format!(
            "non-finite feature at row {i}: {:?}",
            rows[i]
        ))),
        None => Ok(()),
    }
}
