use super::aggregate::{interval, resample_stratified};
use super::{check_same_tasks, Interval, ScoreMatrix};
use crate::error::Result;
use crate::rng::Stream;

/// Fraction of seed pairs where `x` beats `y`, counting ties as half.
fn win_rate(x: &[f64], y: &[f64]) -> f64 {
    let mut twice_wins = 0u64;
    for a in x {
        for b in y {
            twice_wins += if a > b {
                2
            } else if a == b {
                1
            } else {
                0
            };
        }
    }
    twice_wins as f64 / (2 * x.len() * y.len()) as f64
}

fn task_mean(x: &ScoreMatrix, y: &ScoreMatrix) -> f64 {
    let per_task: Vec<f64> = x.scores.iter().map(|(t, xs)| win_rate(xs, &y.scores[t])).collect();
    per_task.iter().sum::<f64>() / per_task.len() as f64
}

/// P(X > Y) averaged over tasks, without an interval.
pub fn probability_of_improvement_point(x: &ScoreMatrix, y: &ScoreMatrix) -> Result<f64> {
    x.validate(1)?;
    y.validate(1)?;
    check_same_tasks(x, y)?;
    Ok(task_mean(x, y))
}

/// P(X > Y) with a stratified-bootstrap interval; both methods are
/// resampled independently within each task.
pub fn probability_of_improvement(
    x: &ScoreMatrix,
    y: &ScoreMatrix,
    replicates: usize,
    confidence: f64,
    seed: u64,
) -> Result<Interval> {
    let estimate = probability_of_improvement_point(x, y)?;
    let root = Stream::new(seed);
    let reps = (0..replicates as u64)
        .map(|r| {
            let mut rng = root.split(r);
            let rx = reshape(x, resample_stratified(x, &mut rng));
            let ry = reshape(y, resample_stratified(y, &mut rng));
            task_mean(&rx, &ry)
        })
        .collect();
    Ok(interval(estimate, reps, confidence))
}

/// Puts pooled values back into the task structure of `like`.
fn reshape(like: &ScoreMatrix, pooled: Vec<f64>) -> ScoreMatrix {
    let mut it = pooled.into_iter();
    let mut out = ScoreMatrix::new(like.method.clone());
    for (t, s) in &like.scores {
        out.scores.insert(t.clone(), it.by_ref().take(s.len()).collect());
    }
    out
}
