//! Score normalization and aggregate statistics over task × seed matrices.
//!
//! Aggregates pool all runs across tasks. Confidence intervals come from a
//! stratified bootstrap that resamples seeds within each task; intervals
//! are percentile intervals with linear interpolation between order
//! statistics.

mod aggregate;
mod curves;
mod normalize;
mod poi;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::driver::RunSummary;
use crate::error::{Error, Result};

pub use aggregate::{aggregate_point_estimates, iqm, mean, median, optimality_gap, percentile, AggregateEstimates};
pub use curves::{performance_profile, sample_efficiency_curve, CurvePoint, RunCurve};
pub use normalize::{normalize, NormalizationTable, REFERENCE_TABLE};
pub use poi::{probability_of_improvement, probability_of_improvement_point};

pub const DEFAULT_REPLICATES: usize = 2000;
pub const DEFAULT_CONFIDENCE: f64 = 0.95;

/// Point estimate with a bootstrap interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Per-task seed scores for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub method: String,
    pub scores: BTreeMap<String, Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(method: impl Into<String>) -> Self {
        ScoreMatrix {
            method: method.into(),
            scores: BTreeMap::new(),
        }
    }

    pub fn with_task(mut self, task: impl Into<String>, scores: Vec<f64>) -> Self {
        self.scores.insert(task.into(), scores);
        self
    }

    pub fn tasks(&self) -> impl Iterator<Item = &String> {
        self.scores.keys()
    }

    /// All scores, task by task in name order.
    pub fn pooled(&self) -> Vec<f64> {
        self.scores.values().flatten().copied().collect()
    }

    pub fn validate(&self, min_seeds: usize) -> Result<()> {
        if self.scores.is_empty() {
            return Err(Error::Empty("score matrix"));
        }
        for (task, s) in &self.scores {
            if s.len() < min_seeds {
                return Err(Error::Config(format!(
                    "method `{}` task `{task}` has {} seeds, need at least {min_seeds}",
                    self.method,
                    s.len()
                )));
            }
            if s.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("score matrix"));
            }
        }
        Ok(())
    }

    /// Groups run summaries by method. Runs without a score are skipped.
    pub fn from_summaries<'a>(runs: impl IntoIterator<Item = &'a RunSummary>) -> BTreeMap<String, ScoreMatrix> {
        let mut out: BTreeMap<String, ScoreMatrix> = BTreeMap::new();
        for r in runs {
            if let Some(s) = r.score {
                out.entry(r.method.clone())
                    .or_insert_with(|| ScoreMatrix::new(r.method.clone()))
                    .scores
                    .entry(r.task.clone())
                    .or_default()
                    .push(s);
            }
        }
        out
    }
}

/// Errors unless both matrices cover the same tasks.
pub fn check_same_tasks(a: &ScoreMatrix, b: &ScoreMatrix) -> Result<()> {
    if a.scores.keys().ne(b.scores.keys()) {
        return Err(Error::Config(format!(
            "methods `{}` and `{}` cover different tasks",
            a.method, b.method
        )));
    }
    Ok(())
}
