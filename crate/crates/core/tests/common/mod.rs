#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thermacal::gp::{FeatureVector, Hyperparams, TrainingSet};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_point(rng: &mut impl Rng) -> FeatureVector {
    [
        rng.gen_range(-0.5..0.5),
        rng.gen_range(-0.4..0.4),
        rng.gen_range(0.4..1.0),
        rng.gen_range(10.0..35.0),
    ]
}

pub fn random_points(rng: &mut impl Rng, n: usize) -> Vec<FeatureVector> {
    (0..n).map(|_| random_point(rng)).collect()
}

/// Length scales comparable to the spread of `random_point`.
pub fn random_hyper(rng: &mut impl Rng) -> Hyperparams {
    Hyperparams::new(
        [
            rng.gen_range(0.5..20.0),
            rng.gen_range(0.5..20.0),
            rng.gen_range(0.5..20.0),
            rng.gen_range(1e-3..0.05),
        ],
        rng.gen_range(0.005..0.05),
        rng.gen_range(0.002..0.02),
    )
    .unwrap()
}

pub fn random_set(rng: &mut impl Rng, n: usize) -> TrainingSet {
    let x = random_points(rng, n);
    let y = x
        .iter()
        .map(|f| {
            0.01 * (3.0 * f[0]).sin() * f[2] + 1e-4 * (f[3] - 20.0) + rng.gen_range(-2e-3..2e-3)
        })
        .collect();
    TrainingSet::new(x, y).unwrap()
}

/// Direct evaluation of the kernel, independent of the library.
pub fn k(a: &FeatureVector, b: &FeatureVector, h: &Hyperparams) -> f64 {
    let q: f64 = (0..4).map(|d| h.w[d] * (a[d] - b[d]).powi(2)).sum();
    h.sigma_s * h.sigma_s * (-0.5 * q).exp()
}

pub fn dense_gram(x: &[FeatureVector], h: &Hyperparams) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| {
        k(&x[i], &x[j], h) + if i == j { h.sigma_y * h.sigma_y } else { 0.0 }
    })
}

pub fn dense_cross(x: &[FeatureVector], q: &[FeatureVector], h: &Hyperparams) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), q.len(), |i, j| k(&x[i], &q[j], h))
}

/// Posterior mean and variance by explicit inversion.
pub fn dense_predict(
    train: &TrainingSet,
    h: &Hyperparams,
    mean_const: f64,
    q: &[FeatureVector],
) -> (Vec<f64>, Vec<f64>) {
    let inv = dense_gram(&train.x, h)
        .try_inverse()
        .expect("invertible gram");
    let r = DVector::from_iterator(train.len(), train.y.iter().map(|y| y - mean_const));
    let ks = dense_cross(&train.x, q, h);
    let mean = ks.transpose() * (&inv * r);
    let prior = h.sigma_s * h.sigma_s + h.sigma_y * h.sigma_y;
    let var = (0..q.len())
        .map(|j| {
            let c = ks.column(j);
            prior - (c.transpose() * &inv * c)[(0, 0)]
        })
        .collect();
    (mean.iter().map(|m| m + mean_const).collect(), var)
}

/// `0.5 r^T S^-1 r + 0.5 ln det S + n/2 ln 2 pi` with an explicit inverse and
/// the log-determinant from the eigenvalues.
pub fn dense_nlml(train: &TrainingSet, h: &Hyperparams, mean_const: f64) -> f64 {
    let s = dense_gram(&train.x, h);
    let r = DVector::from_iterator(train.len(), train.y.iter().map(|y| y - mean_const));
    let fit = r.dot(&(s.clone().try_inverse().unwrap() * &r));
    let log_det: f64 = s.symmetric_eigenvalues().iter().map(|v| v.ln()).sum();
    0.5 * fit + 0.5 * log_det + 0.5 * train.len() as f64 * (2.0 * std::f64::consts::PI).ln()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
