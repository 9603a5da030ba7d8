use super::EvalError;
use crate::data::Split;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Acoustic,
    Crossview,
    DtwAcoustic,
}

/// One evaluation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub split: Split,
    pub ap: f64,
    pub num_pairs: usize,
    pub seed: u64,
}

/// One row of a learning curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub dev_acoustic_ap: f64,
}

pub fn write_curve(path: &Path, points: &[CurvePoint]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve(path: &Path) -> Result<Vec<CurvePoint>, EvalError> {
    let mut r = csv::Reader::from_path(path)?;
    let points = r.deserialize().collect::<Result<Vec<CurvePoint>, _>>()?;
    Ok(points)
}
