use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{FeatureVector, TrainingSet, DIM};

/// Regular 4D grid: cell `k` along dimension `d` covers
/// `[origin[d] + k * cell[d], origin[d] + (k + 1) * cell[d])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Cell sizes: meters for x, y, z and degrees Celsius for t.
    pub cell: [f64; DIM],
    pub origin: [f64; DIM],
}

impl Default for GridSpec {
    /// 7.5 cm in x and y, 10 cm in z (cells centered on whole decimeters),
    /// 3 degrees in temperature. The full capture protocol then yields
    /// roughly 5000 occupied cells.
    fn default() -> Self {
        GridSpec {
            cell: [0.075, 0.075, 0.1, 3.0],
            origin: [0.0, 0.0, 0.05, 0.0],
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.cell.iter().any(|c| !(*c > 0.0) || !c.is_finite()) {
            return Err(Error::Contract(format!(
                "grid cell sizes must be positive: {:?}",
                self.cell
            )));
        }
        if self.origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::Contract("non-finite grid origin".into()));
        }
        Ok(())
    }

    pub fn cell_of(&self, f: &FeatureVector) -> [i64; DIM] {
        let mut key = [0i64; DIM];
        for d in 0..DIM {
            key[d] = ((f[d] - self.origin[d]) / self.cell[d]).floor() as i64;
        }
        key
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct CellSum {
    feature: [f64; DIM],
    target: f64,
    count: u64,
}

/// Streaming cell-mean aggregator, so large datasets never need to be held
/// in memory as one feature matrix.
#[derive(Debug, Clone)]
pub struct GridAccumulator {
    spec: GridSpec,
    cells: BTreeMap<[i64; DIM], CellSum>,
}

impl GridAccumulator {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        Ok(GridAccumulator {
            spec,
            cells: BTreeMap::new(),
        })
    }

    pub fn add(&mut self, feature: &FeatureVector, target: f64) {
        let cell = self.cells.entry(self.spec.cell_of(feature)).or_default();
        for d in 0..DIM {
            cell.feature[d] += feature[d];
        }
        cell.target += target;
        cell.count += 1;
    }

    pub fn extend(&mut self, features: &[FeatureVector], targets: &[f64]) -> Result<()> {
        if features.len() != targets.len() {
            return Err(Error::Contract(format!(
                "{} features but {} targets",
                features.len(),
                targets.len()
            )));
        }
        for (f, t) in features.iter().zip(targets) {
            if f.iter().all(|v| v.is_finite()) && t.is_finite() {
                self.add(f, *t);
            }
        }
        Ok(())
    }

    pub fn occupied_cells(&self) -> usize {
        self.cells.len()
    }

    /// One `(mean feature, mean target)` pair per occupied cell, in cell order.
    pub fn finish(&self) -> TrainingSet {
        let (x, y) = self
            .cells
            .values()
            .map(|c| {
                let n = c.count as f64;
                (c.feature.map(|v| v / n), c.target / n)
            })
            .unzip();
        TrainingSet { x, y }
    }
}

/// Cell-mean sampling of `(features, targets)` on `grid`. Empty input gives
/// an empty set.
pub fn grid_sample(
    features: &[FeatureVector],
    targets: &[f64],
    grid: &GridSpec,
) -> Result<TrainingSet> {
    let mut acc = GridAccumulator::new(*grid)?;
    acc.extend(features, targets)?;
    Ok(acc.finish())
}
