use super::model::factor_gram;
use super::{FeatureVector, Hyperparams, TrainingSet, DIM};
use crate::error::Result;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Negative log marginal likelihood of the targets under a constant prior
/// mean, `0.5 r^T Sigma^-1 r + 0.5 ln|Sigma| + (N/2) ln 2pi`.
pub fn nlml(train: &TrainingSet, hyper: &Hyperparams, mean_const: f64) -> Result<f64> {
    train.validate()?;
    hyper.validate()?;
    let chol = factor_gram(&train.x, hyper, 0.0)?;
    let mut alpha: Vec<f64> = train.y.iter().map(|y| y - mean_const).collect();
    chol.solve_in_place(&mut alpha);
    let fit_term: f64 = train
        .y
        .iter()
        .zip(&alpha)
        .map(|(y, a)| (y - mean_const) * a)
        .sum();
    Ok(0.5 * fit_term + chol.half_log_det() + train.len() as f64 * HALF_LN_2PI)
}

/// Gradient of [`nlml`] with respect to `ln(w0..w3, sigma_s^2, sigma_y^2)`,
/// using `0.5 tr((Sigma^-1 - alpha alpha^T) dSigma/dtheta)`.
pub fn nlml_grad(train: &TrainingSet, log_hyper: &[f64; 6], mean_const: f64) -> Result<[f64; 6]> {
    Ok(nlml_with_grad(train, log_hyper, mean_const)?.1)
}

/// Value and gradient in one factorization.
pub(crate) fn nlml_with_grad(
    train: &TrainingSet,
    log_hyper: &[f64; 6],
    mean_const: f64,
) -> Result<(f64, [f64; 6])> {
    train.validate()?;
    let hyper = Hyperparams::from_log(log_hyper);
    hyper.validate()?;
    let x: &[FeatureVector] = &train.x;
    let n = x.len();
    let chol = factor_gram(x, &hyper, 0.0)?;
    let mut alpha: Vec<f64> = train.y.iter().map(|y| y - mean_const).collect();
    chol.solve_in_place(&mut alpha);
    let fit_term: f64 = train
        .y
        .iter()
        .zip(&alpha)
        .map(|(y, a)| (y - mean_const) * a)
        .sum();
    let value = 0.5 * fit_term + chol.half_log_det() + n as f64 * HALF_LN_2PI;

    let inv = chol.inverse_of_product();
    let sv = hyper.signal_var();
    let mut grad = [0.0; 6];
    for i in 0..n {
        // diagonal: signal and noise terms, no length-scale contribution
        let a_ii = inv.get(i, i) - alpha[i] * alpha[i];
        grad[4] += 0.5 * a_ii * sv;
        grad[5] += 0.5 * a_ii * hyper.noise_var();
        for j in 0..i {
            // off-diagonal pairs counted twice by symmetry
            let a_ij = inv.get(i, j) - alpha[i] * alpha[j];
            let mut sq = [0.0; DIM];
            let mut q = 0.0;
            for k in 0..DIM {
                let d = x[i][k] - x[j][k];
                sq[k] = d * d;
                q += hyper.w[k] * sq[k];
            }
            let kf = sv * (-0.5 * q).exp();
            let c = a_ij * kf;
            grad[4] += c;
            for k in 0..DIM {
                grad[k] -= 0.5 * c * hyper.w[k] * sq[k];
            }
        }
    }
    Ok((value, grad))
}
