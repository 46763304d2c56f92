//! End-to-end commands over a dataset directory.

mod config;
mod dataset;
mod report;
mod train;

use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

pub use config::{MeanMode, OptimizerSettings, PipelineConfig, Protocol, TargetMode};
pub use dataset::{accumulate_capture, build_training_set, split_temperatures, Dataset};
pub use report::{
    CaptureScore, EvalReport, HardwareReference, HARDWARE_REFERENCE_AFTER,
    HARDWARE_REFERENCE_BEFORE,
};
pub use train::{initial_hyper, train_from_dataset, train_model, TrainSummary};

use crate::error::{Error, Result};
use crate::geom::{correct_depth, correct_depth_with, CorrectOptions, RmseAccumulator};
use crate::gp::{read_model, write_model, FittedGp};
use crate::sim::{generate_dataset, Manifest};

pub fn cmd_generate(cfg: &PipelineConfig) -> Result<Manifest> {
    cfg.validate()?;
    generate_dataset(&cfg.rig, &cfg.drift, &cfg.camera(), &cfg.dataset_dir)
}

/// Trains on the dataset and writes the model file.
pub fn cmd_train(cfg: &PipelineConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let ds = Dataset::open(&cfg.dataset_dir, cfg.t_min)?;
    let (gp, summary) = train_from_dataset(&ds, cfg)?;
    if let Some(dir) = cfg
        .model_path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
    {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_model(&gp, &cfg.model_path)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrectOutput {
    pub position: f64,
    pub temperature: f64,
    pub corrected: PathBuf,
    pub confidence: PathBuf,
    pub pixels: usize,
    pub mean_offset: f64,
}

/// Corrects one capture and writes `<stem>_corrected.pfm` and
/// `<stem>_confidence.pfm` (posterior variance, m^2) to the output directory.
pub fn cmd_correct(cfg: &PipelineConfig, position: f64, temperature: f64) -> Result<CorrectOutput> {
    cfg.validate()?;
    let ds = Dataset::open(&cfg.dataset_dir, cfg.t_min)?;
    let gp = read_model(&cfg.model_path)?;
    let entry = ds.manifest.find(position, temperature)?;
    let source = ds.source(entry, cfg.target_mode)?;
    let result = correct_depth(&source, entry.temperature, &gp, ds.camera(), cfg.chunk)?;

    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let stem = crate::sim::capture_stem(entry.position, entry.temperature);
    let corrected = cfg.output_dir.join(format!("{stem}_corrected.pfm"));
    let confidence = cfg.output_dir.join(format!("{stem}_confidence.pfm"));
    result.corrected.write_pfm(&corrected)?;
    if let Some(c) = &result.confidence {
        c.write_pfm(&confidence)?;
    }
    let offsets: Vec<f64> = result
        .delta
        .data()
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .collect();
    let mean_offset = if offsets.is_empty() {
        0.0
    } else {
        offsets.iter().sum::<f64>() / offsets.len() as f64
    };
    Ok(CorrectOutput {
        position: entry.position,
        temperature: entry.temperature,
        corrected,
        confidence,
        pixels: offsets.len(),
        mean_offset,
    })
}

/// Scores `gp` on the captures the protocol sets aside for evaluation:
/// RMSE of the source map and of the corrected map against the reference
/// map at `t_min`, pooled over all of them.
pub fn evaluate_model(ds: &Dataset, gp: &FittedGp, cfg: &PipelineConfig) -> Result<EvalReport> {
    let (_, eval_temps) =
        split_temperatures(&ds.manifest.temperatures(), cfg.protocol, cfg.holdout_step)?;
    if eval_temps.is_empty() {
        return Err(Error::Contract(
            "no temperature levels left for evaluation; use the paper protocol".into(),
        ));
    }
    let cam = ds.camera();
    let opts = CorrectOptions {
        chunk: cfg.chunk,
        confidence: false,
    };
    let entries = ds.entries_at(&eval_temps);
    let scored: Vec<(CaptureScore, RmseAccumulator, RmseAccumulator)> = entries
        .par_iter()
        .map(|e| {
            let source = ds.source(e, cfg.target_mode)?;
            let reference = ds.baseline(e)?;
            let corrected = correct_depth_with(&source, e.temperature, gp, cam, &opts)?.corrected;
            let mut before = RmseAccumulator::default();
            let mut after = RmseAccumulator::default();
            before.add_maps(&source, &reference, cam)?;
            after.add_maps(&corrected, &reference, cam)?;
            let score = CaptureScore {
                position: e.position,
                temperature: e.temperature,
                pixels: after.count(),
                before: before.finish()?,
                after: after.finish()?,
            };
            Ok((score, before, after))
        })
        .collect::<Result<_>>()?;

    let mut before = RmseAccumulator::default();
    let mut after = RmseAccumulator::default();
    for (_, b, a) in &scored {
        before.merge(b);
        after.merge(a);
    }
    Ok(EvalReport {
        protocol: cfg.protocol,
        target_mode: cfg.target_mode,
        t_min: ds.t_min,
        n_train: gp.len(),
        eval_temperatures: eval_temps,
        pixels: after.count(),
        before: before.finish()?,
        after: after.finish()?,
        captures: scored.into_iter().map(|(s, _, _)| s).collect(),
        hardware_reference: EvalReport::hardware_reference(),
    })
}

/// Loads the model, scores it and writes the JSON report.
pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let ds = Dataset::open(&cfg.dataset_dir, cfg.t_min)?;
    let gp = read_model(&cfg.model_path)?;
    let report = evaluate_model(&ds, &gp, cfg)?;
    let json =
        serde_json::to_string_pretty(&report).map_err(|e| Error::json(&cfg.report_path, e))?;
    if let Some(dir) = cfg
        .report_path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
    {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(&cfg.report_path, json).map_err(|e| Error::io(&cfg.report_path, e))?;
    Ok(report)
}
