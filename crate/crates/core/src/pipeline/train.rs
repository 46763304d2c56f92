use serde::Serialize;

use super::config::{MeanMode, PipelineConfig};
use super::dataset::{build_training_set, split_temperatures, Dataset};
use crate::error::{Error, Result};
use crate::gp::{
    fit_with_jitter, optimize_hyper, FittedGp, Hyperparams, OptimizeOptions, TrainingSet, DIM,
};

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub n_train: usize,
    pub train_temperatures: Vec<f64>,
    pub hyper: Hyperparams,
    pub mean_const: f64,
    /// Points used by the hyperparameter search.
    pub opt_points: usize,
    pub initial_nlml: f64,
    pub final_nlml: f64,
    pub iterations: usize,
    pub converged: bool,
    pub jitter: f64,
    pub warning: Option<String>,
}

/// Starting point for the search: signal scale from the target spread, noise
/// a third of it, and each length scale matched to its feature's spread.
/// Constant features get zero weight.
pub fn initial_hyper(train: &TrainingSet) -> Result<Hyperparams> {
    if train.is_empty() {
        return Err(Error::Contract("training set is empty".into()));
    }
    let n = train.len() as f64;
    let mean_y = train.target_mean();
    let var_y = train.y.iter().map(|v| (v - mean_y).powi(2)).sum::<f64>() / n;
    let sigma_s = var_y.sqrt().max(1e-6);
    let mut w = [0.0; DIM];
    for (d, wd) in w.iter_mut().enumerate() {
        let m = train.x.iter().map(|f| f[d]).sum::<f64>() / n;
        let v = train.x.iter().map(|f| (f[d] - m).powi(2)).sum::<f64>() / n;
        *wd = if v > 1e-12 { 1.0 / v } else { 0.0 };
    }
    Hyperparams::new(w, sigma_s, sigma_s / 3.0)
}

/// Tunes hyperparameters on a subsample, then fits on the full set.
pub fn train_model(train: &TrainingSet, cfg: &PipelineConfig) -> Result<(FittedGp, TrainSummary)> {
    train.validate()?;
    let mean_const = match cfg.mean {
        MeanMode::Zero => 0.0,
        MeanMode::TargetMean => train.target_mean(),
    };
    let init = initial_hyper(train)?;
    let subset = train.subsample(cfg.optimizer.max_points.max(2));
    // Constant targets have an unbounded likelihood as the noise shrinks.
    let flat = train.y.iter().all(|&v| v == train.y[0]);
    let opts = OptimizeOptions {
        max_iters: if cfg.optimizer.enabled && !flat {
            cfg.optimizer.max_iters
        } else {
            0
        },
        tol: cfg.optimizer.tol,
        mean_const,
        ..OptimizeOptions::default()
    };
    let outcome = optimize_hyper(&subset, &init, &opts)?;
    log::info!(
        "hyperparameters after {} iterations: nlml {:.3} -> {:.3}, {:?}",
        outcome.iterations,
        outcome.initial_nlml,
        outcome.nlml,
        outcome.hyper
    );
    let gp = fit_with_jitter(train, &outcome.hyper, mean_const)?;
    let summary = TrainSummary {
        n_train: train.len(),
        train_temperatures: Vec::new(),
        hyper: outcome.hyper,
        mean_const,
        opt_points: subset.len(),
        initial_nlml: outcome.initial_nlml,
        final_nlml: outcome.nlml,
        iterations: outcome.iterations,
        converged: outcome.converged,
        jitter: gp.jitter(),
        warning: outcome.warning,
    };
    Ok((gp, summary))
}

/// Builds the training set selected by the protocol and fits a model.
pub fn train_from_dataset(ds: &Dataset, cfg: &PipelineConfig) -> Result<(FittedGp, TrainSummary)> {
    let (temps, _) =
        split_temperatures(&ds.manifest.temperatures(), cfg.protocol, cfg.holdout_step)?;
    let set = build_training_set(ds, &temps, cfg.target_mode, &cfg.grid)?;
    log::info!(
        "{} grid samples from {} temperature levels",
        set.len(),
        temps.len()
    );
    let (gp, mut summary) = train_model(&set, cfg)?;
    summary.train_temperatures = temps;
    Ok((gp, summary))
}
