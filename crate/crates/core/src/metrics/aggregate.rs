use serde::{Deserialize, Serialize};

use super::{Interval, ScoreMatrix};
use crate::error::{Error, Result};
use crate::rng::Stream;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn median(xs: &[f64]) -> f64 {
    percentile(&sorted(xs), 0.5)
}

/// Mean of the middle half: drops `floor(n / 4)` scores from each end.
pub fn iqm(xs: &[f64]) -> f64 {
    let v = sorted(xs);
    let k = v.len() / 4;
    mean(&v[k..v.len() - k])
}

/// `mean(max(0, 1 - s))`.
pub fn optimality_gap(xs: &[f64]) -> f64 {
    xs.iter().map(|s| (1.0 - s).max(0.0)).sum::<f64>() / xs.len() as f64
}

/// Quantile `q` of already sorted data, interpolating linearly between
/// order statistics at position `q (n - 1)`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateEstimates {
    pub median: Interval,
    pub iqm: Interval,
    pub mean: Interval,
    pub optimality_gap: Interval,
}

fn stats(pooled: &[f64]) -> [f64; 4] {
    [median(pooled), iqm(pooled), mean(pooled), optimality_gap(pooled)]
}

/// One stratified resample: `n_task` draws with replacement within each task.
pub(crate) fn resample_stratified(m: &ScoreMatrix, rng: &mut Stream) -> Vec<f64> {
    let mut out = Vec::new();
    for s in m.scores.values() {
        for _ in 0..s.len() {
            out.push(s[rng.below(s.len() as u64) as usize]);
        }
    }
    out
}

pub(crate) fn interval(estimate: f64, mut reps: Vec<f64>, confidence: f64) -> Interval {
    reps.sort_by(f64::total_cmp);
    let tail = (1.0 - confidence) / 2.0;
    Interval {
        estimate,
        lower: percentile(&reps, tail),
        upper: percentile(&reps, 1.0 - tail),
    }
}

/// Median, IQM, mean and optimality gap of the pooled scores with
/// stratified-bootstrap intervals. Replicate `r` draws from
/// `Stream::new(seed).split(r)`.
pub fn aggregate_point_estimates(m: &ScoreMatrix, replicates: usize, confidence: f64, seed: u64) -> Result<AggregateEstimates> {
    m.validate(2)?;
    if replicates == 0 {
        return Err(Error::Config("bootstrap needs at least one replicate".into()));
    }
    let point = stats(&m.pooled());
    let root = Stream::new(seed);
    let mut reps: [Vec<f64>; 4] = Default::default();
    for r in 0..replicates {
        let sample = resample_stratified(m, &mut root.split(r as u64));
        for (acc, v) in reps.iter_mut().zip(stats(&sample)) {
            acc.push(v);
        }
    }
    let [rm, ri, rmean, rg] = reps;
    Ok(AggregateEstimates {
        median: interval(point[0], rm, confidence),
        iqm: interval(point[1], ri, confidence),
        mean: interval(point[2], rmean, confidence),
        optimality_gap: interval(point[3], rg, confidence),
    })
}
