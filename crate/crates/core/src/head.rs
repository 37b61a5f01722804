//! Action distributions on top of the actor network output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyHead {
    /// Softmax over `n` logits; actions are stored as `[index as f64]`.
    Categorical { n: usize },
    /// Independent normals per dimension. The distribution parameters are
    /// `[mean..., log_std...]`; the log-std part is a state-independent
    /// parameter rather than a network output.
    DiagonalGaussian { action_dim: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadEval {
    pub log_prob: f64,
    pub entropy: f64,
    /// d log_prob / d dist_params.
    pub dlog_prob: Vec<f64>,
}

impl PolicyHead {
    /// Width of the actor network output.
    pub fn net_output_dim(&self) -> usize {
        match *self {
            PolicyHead::Categorical { n } => n,
            PolicyHead::DiagonalGaussian { action_dim } => action_dim,
        }
    }

    pub fn dist_param_dim(&self) -> usize {
        match *self {
            PolicyHead::Categorical { n } => n,
            PolicyHead::DiagonalGaussian { action_dim } => 2 * action_dim,
        }
    }

    /// Number of f64 slots one stored action occupies.
    pub fn action_width(&self) -> usize {
        match *self {
            PolicyHead::Categorical { .. } => 1,
            PolicyHead::DiagonalGaussian { action_dim } => action_dim,
        }
    }

    fn check(&self, dist_params: &[f64]) -> Result<()> {
        if dist_params.len() != self.dist_param_dim() {
            return Err(Error::Dimension {
                context: "policy head params",
                expected: self.dist_param_dim(),
                got: dist_params.len(),
            });
        }
        if dist_params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("policy head params"));
        }
        Ok(())
    }

    pub fn log_prob_and_entropy(&self, dist_params: &[f64], action: &[f64]) -> Result<HeadEval> {
        self.check(dist_params)?;
        match *self {
            PolicyHead::Categorical { n } => {
                let a = discrete_index(action, n)?;
                let probs = softmax(dist_params);
                let max = dist_params.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + dist_params.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
                let log_prob = dist_params[a] - lse;
                let entropy = -probs
                    .iter()
                    .zip(dist_params)
                    .filter(|(p, _)| **p > 0.0)
                    .map(|(p, z)| p * (z - lse))
                    .sum::<f64>();
                let mut dlog_prob: Vec<f64> = probs.iter().map(|p| -p).collect();
                dlog_prob[a] += 1.0;
                Ok(HeadEval {
                    log_prob,
                    entropy: entropy.max(0.0),
                    dlog_prob,
                })
            }
            PolicyHead::DiagonalGaussian { action_dim } => {
                if action.len() != action_dim {
                    return Err(Error::InvalidAction(format!(
                        "expected {action_dim}-dim continuous action, got {}",
                        action.len()
                    )));
                }
                let (mean, log_std) = dist_params.split_at(action_dim);
                let mut log_prob = 0.0;
                let mut entropy = 0.0;
                let mut dlog_prob = vec![0.0; 2 * action_dim];
                for i in 0..action_dim {
                    let std = log_std[i].exp();
                    let z = (action[i] - mean[i]) / std;
                    log_prob += -0.5 * z * z - log_std[i] - HALF_LN_2PI;
                    entropy += log_std[i] + 0.5 + HALF_LN_2PI;
                    dlog_prob[i] = z / std;
                    dlog_prob[action_dim + i] = z * z - 1.0;
                }
                Ok(HeadEval {
                    log_prob,
                    entropy,
                    dlog_prob,
                })
            }
        }
    }

    pub fn sample(&self, dist_params: &[f64], rng: &mut Stream) -> Result<Vec<f64>> {
        self.check(dist_params)?;
        match *self {
            PolicyHead::Categorical { n } => {
                let probs = softmax(dist_params);
                let u = rng.uniform();
                let mut acc = 0.0;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return Ok(vec![i as f64]);
                    }
                }
                Ok(vec![(n - 1) as f64])
            }
            PolicyHead::DiagonalGaussian { action_dim } => {
                let (mean, log_std) = dist_params.split_at(action_dim);
                Ok(mean
                    .iter()
                    .zip(log_std)
                    .map(|(m, s)| m + s.exp() * rng.normal())
                    .collect())
            }
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn discrete_index(action: &[f64], n: usize) -> Result<usize> {
    match action {
        [a] if a.fract() == 0.0 && *a >= 0.0 && (*a as usize) < n => Ok(*a as usize),
        _ => Err(Error::InvalidAction(format!(
            "{action:?} is not an index in 0..{n}"
        ))),
    }
}
