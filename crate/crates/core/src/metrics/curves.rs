use serde::{Deserialize, Serialize};

use super::{NormalizationTable, ScoreMatrix};
use crate::error::{Error, Result};

/// Fraction of pooled scores strictly above each threshold.
pub fn performance_profile(m: &ScoreMatrix, thresholds: &[f64]) -> Result<Vec<f64>> {
    let pooled = m.pooled();
    if pooled.is_empty() {
        return Err(Error::Empty("performance profile scores"));
    }
    let n = pooled.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&t| pooled.iter().filter(|&&s| s > t).count() as f64 / n)
        .collect())
}

/// Raw evaluation curve of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCurve {
    pub task: String,
    /// `(transitions, mean return)` per eval point.
    pub points: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub transitions: u64,
    pub mean: f64,
    pub stderr: f64,
    pub runs: usize,
}

/// Normalized mean and standard error across runs at each eval index.
/// Runs that stopped early only contribute to the indices they reached.
/// The standard error uses the sample deviation and is zero for one run.
pub fn sample_efficiency_curve(runs: &[RunCurve], table: &NormalizationTable) -> Result<Vec<CurvePoint>> {
    let len = runs.iter().map(|r| r.points.len()).max().ok_or(Error::Empty("efficiency runs"))?;
    let mut out = Vec::with_capacity(len);
    for j in 0..len {
        let mut vals = Vec::new();
        let mut transitions = 0;
        for r in runs {
            if let Some(&(t, v)) = r.points.get(j) {
                vals.push(table.normalize_value(&r.task, v)?);
                transitions = t;
            }
        }
        let n = vals.len();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        out.push(CurvePoint {
            transitions,
            mean,
            stderr,
            runs: n,
        });
    }
    Ok(out)
}
