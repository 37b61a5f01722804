//! The epoch/minibatch inner optimization that turns θ into θ*.

use serde::{Deserialize, Serialize};

use crate::adam::{AdamState, Anneal};
use crate::error::{Error, Result};
use crate::gae::{normalize_advantages, AdvantageEstimate};
use crate::loss::{clipped_policy_loss, clipped_value_loss};
use crate::model::ActorCritic;
use crate::params::ParamVector;
use crate::rng::Stream;
use crate::rollout::TransitionBatch;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PpoConfig {
    pub num_envs: usize,
    pub rollout_len: usize,
    pub num_epochs: usize,
    pub num_minibatches: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub max_grad_norm: f64,
    pub reward_scale: f64,
    /// Falls back to `clip_eps` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_clip_eps: Option<f64>,
    #[serde(default = "yes")]
    pub anneal_lr: bool,
    #[serde(default = "yes")]
    pub normalize_advantages: bool,
}

fn yes() -> bool {
    true
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            num_envs: 8,
            rollout_len: 128,
            num_epochs: 4,
            num_minibatches: 4,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            max_grad_norm: 0.5,
            reward_scale: 1.0,
            value_clip_eps: None,
            anneal_lr: true,
            normalize_advantages: true,
        }
    }
}

/// Baseline search ranges: (name, low, high, log scale).
pub const SEARCH_RANGES: [(&str, f64, f64, bool); 11] = [
    ("num_envs", 64.0, 1024.0, true),
    ("rollout_len", 4.0, 256.0, true),
    ("num_epochs", 1.0, 16.0, false),
    ("num_minibatches", 1.0, 64.0, true),
    ("actor_lr", 1e-5, 1e-3, true),
    ("critic_lr", 1e-5, 1e-3, true),
    ("gamma", 0.9, 1.0, false),
    ("gae_lambda", 0.0, 1.0, false),
    ("clip_eps", 0.1, 0.5, false),
    ("max_grad_norm", 0.1, 5.0, false),
    ("reward_scale", 0.1, 100.0, true),
];

impl PpoConfig {
    pub fn batch_size(&self) -> usize {
        self.rollout_len * self.num_envs
    }

    pub fn minibatch_size(&self) -> usize {
        self.batch_size() / self.num_minibatches
    }

    pub fn value_clip(&self) -> f64 {
        self.value_clip_eps.unwrap_or(self.clip_eps)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_envs == 0 || self.rollout_len == 0 {
            return bad("num_envs and rollout_len must be >= 1".into());
        }
        if self.num_epochs == 0 {
            return bad("num_epochs must be >= 1".into());
        }
        if self.num_minibatches == 0 || !self.num_minibatches.is_power_of_two() {
            return bad(format!("num_minibatches must be a power of two, got {}", self.num_minibatches));
        }
        if self.batch_size() % self.num_minibatches != 0 {
            return bad(format!(
                "rollout_len * num_envs = {} is not divisible by num_minibatches = {}",
                self.batch_size(),
                self.num_minibatches
            ));
        }
        if !(0.05..=0.5).contains(&self.clip_eps) {
            return bad(format!("clip_eps must lie in [0.05, 0.5], got {}", self.clip_eps));
        }
        for (name, v) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("max_grad_norm", self.max_grad_norm),
            ("reward_scale", self.reward_scale),
            ("value_clip_eps", self.value_clip()),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("gamma", self.gamma), ("gae_lambda", self.gae_lambda)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        Ok(())
    }

    /// Names of fields outside the baseline search ranges.
    pub fn out_of_search_ranges(&self) -> Vec<&'static str> {
        let values = [
            self.num_envs as f64,
            self.rollout_len as f64,
            self.num_epochs as f64,
            self.num_minibatches as f64,
            self.actor_lr,
            self.critic_lr,
            self.gamma,
            self.gae_lambda,
            self.clip_eps,
            self.max_grad_norm,
            self.reward_scale,
        ];
        SEARCH_RANGES
            .iter()
            .zip(values)
            .filter(|((_, lo, hi, _), v)| v < lo || v > hi)
            .map(|((name, ..), _)| *name)
            .collect()
    }

    pub fn make_optimizers(&self, model: &ActorCritic, total_iterations: u64) -> InnerOptimizers {
        let anneal = if self.anneal_lr {
            Anneal::LinearToZero {
                total_updates: total_iterations * (self.num_epochs * self.num_minibatches) as u64,
            }
        } else {
            Anneal::None
        };
        InnerOptimizers {
            actor: AdamState::new(model.policy_range().len(), self.actor_lr, anneal),
            critic: AdamState::new(model.critic_range().len(), self.critic_lr, anneal),
        }
    }
}

/// Independent Adam instances for θ^π and θ^V.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerOptimizers {
    pub actor: AdamState,
    pub critic: AdamState,
}

impl InnerOptimizers {
    pub fn reset_moments(&mut self) {
        self.actor.reset_moments();
        self.critic.reset_moments();
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InnerDiagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub clip_fraction: f64,
    pub active_fraction: f64,
    pub mean_ratio: f64,
    pub entropy: f64,
    pub actor_lr: f64,
    pub updates: u64,
}

/// Runs `num_epochs` passes, each over `num_minibatches` minibatches drawn
/// from one fresh permutation of the flattened batch. Returns θ* and leaves
/// `theta` untouched. The behavior log-probs in `batch` define the ratio
/// denominator regardless of where the optimization starts.
pub fn inner_optimization_loop(
    model: &ActorCritic,
    theta: &ParamVector,
    batch: &TransitionBatch,
    adv: &AdvantageEstimate,
    cfg: &PpoConfig,
    opt: &mut InnerOptimizers,
    rng: &mut Stream,
) -> Result<(ParamVector, InnerDiagnostics)> {
    if cfg.num_epochs == 0 {
        return Err(Error::Config("num_epochs must be >= 1".into()));
    }
    let n = batch.len();
    if cfg.num_minibatches == 0 || n % cfg.num_minibatches != 0 {
        return Err(Error::Config(format!(
            "batch of {n} samples cannot be split into {} minibatches",
            cfg.num_minibatches
        )));
    }
    if adv.advantages.len() != n || adv.value_targets.len() != n {
        return Err(Error::Dimension {
            context: "advantage estimate",
            expected: n,
            got: adv.advantages.len(),
        });
    }
    let mb = n / cfg.num_minibatches;
    let policy_range = model.policy_range();
    let critic_range = model.critic_range();
    let mut out = theta.clone();
    let mut diag = InnerDiagnostics::default();
    for _ in 0..cfg.num_epochs {
        let perm = rng.permutation(n);
        for idx in perm.chunks(mb) {
            let raw_adv: Vec<f64> = idx.iter().map(|&i| adv.advantages[i]).collect();
            let mb_adv = if cfg.normalize_advantages {
                normalize_advantages(&raw_adv)
            } else {
                raw_adv
            };
            let targets: Vec<f64> = idx.iter().map(|&i| adv.value_targets[i]).collect();
            let prev: Vec<f64> = idx.iter().map(|&i| batch.values[i]).collect();
            let th = out.as_slice();
            let pl = clipped_policy_loss(model, th, batch, idx, &mb_adv, cfg.clip_eps)?;
            let vl = clipped_value_loss(model, th, batch, idx, &targets, &prev, cfg.value_clip())?;
            let data = out.as_mut_slice();
            let info = opt
                .actor
                .step(&mut data[policy_range.clone()], &pl.grad, cfg.max_grad_norm)?;
            opt.critic
                .step(&mut data[critic_range.clone()], &vl.grad, cfg.max_grad_norm)?;
            diag.policy_loss += pl.loss;
            diag.value_loss += vl.loss;
            diag.clip_fraction += pl.clip_fraction;
            diag.active_fraction += pl.active_fraction;
            diag.mean_ratio += pl.mean_ratio;
            diag.entropy += pl.entropy;
            diag.actor_lr = info.lr;
            diag.updates += 1;
        }
    }
    if !out.is_finite() {
        return Err(Error::NonFinite("inner-loop parameters"));
    }
    let k = diag.updates as f64;
    diag.policy_loss /= k;
    diag.value_loss /= k;
    diag.clip_fraction /= k;
    diag.active_fraction /= k;
    diag.mean_ratio /= k;
    diag.entropy /= k;
    Ok((out, diag))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        PpoConfig::default().validate().unwrap();
    }

    #[test]
    fn validation_errors() {
        let base = PpoConfig::default();
        let cases = [
            PpoConfig { num_epochs: 0, ..base.clone() },
            PpoConfig { num_minibatches: 3, ..base.clone() },
            PpoConfig { num_minibatches: 2048, ..base.clone() },
            PpoConfig { clip_eps: 0.7, ..base.clone() },
            PpoConfig { actor_lr: 0.0, ..base.clone() },
            PpoConfig { gamma: 1.5, ..base.clone() },
        ];
        for c in cases {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn value_clip_defaults_to_policy_clip() {
        let c = PpoConfig { clip_eps: 0.13, ..PpoConfig::default() };
        assert_eq!(c.value_clip(), 0.13);
        let c = PpoConfig { value_clip_eps: Some(0.3), ..c };
        assert_eq!(c.value_clip(), 0.3);
    }
}
