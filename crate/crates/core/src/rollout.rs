//! Vectorized trajectory collection with auto-reset.
//!
//! Each env slot owns its own random stream, used both for action sampling
//! and for drawing reset seeds, so a batch of `N` slots is exactly the
//! interleaving of `N` independent single-slot collections.

use crate::env::{Env, EnvState};
use crate::error::{Error, Result};
use crate::model::ActorCritic;
use crate::params::ParamVector;
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSlot {
    pub state: EnvState,
    pub obs: Vec<f64>,
    pub rng: Stream,
    pub episode_return: f64,
    pub episode_len: u32,
}

impl EnvSlot {
    pub fn new(env: &Env, mut rng: Stream) -> Self {
        let (state, obs) = env.reset(rng.next_u64());
        EnvSlot {
            state,
            obs,
            rng,
            episode_return: 0.0,
            episode_len: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VecEnv {
    pub env: Env,
    pub slots: Vec<EnvSlot>,
}

impl VecEnv {
    pub fn new(env: Env, streams: Vec<Stream>) -> Self {
        let slots = streams.into_iter().map(|s| EnvSlot::new(&env, s)).collect();
        VecEnv { env, slots }
    }

    /// Slot `i` uses `root.split(i)`.
    pub fn from_root(env: Env, root: &Stream, n: usize) -> Self {
        let streams = (0..n as u64).map(|i| root.split(i)).collect();
        Self::new(env, streams)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

/// Time-major storage: sample `(t, n)` lives at flat index `t * n_envs + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionBatch {
    pub t_len: usize,
    pub n_envs: usize,
    pub obs_dim: usize,
    pub action_width: usize,
    pub obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub behavior_log_probs: Vec<f64>,
    /// Rewards multiplied by the reward scale; used for learning.
    pub rewards: Vec<f64>,
    /// Unscaled rewards, kept for logging.
    pub raw_rewards: Vec<f64>,
    pub terminated: Vec<bool>,
    pub truncated: Vec<bool>,
    pub values: Vec<f64>,
    /// `V(s_{t+1})` of the final observation where an episode was truncated, else 0.
    pub truncation_values: Vec<f64>,
    /// `V` of each slot's observation after the last step.
    pub bootstrap_values: Vec<f64>,
    /// Raw returns of episodes that finished during collection.
    pub completed_returns: Vec<f64>,
}

impl TransitionBatch {
    pub fn len(&self) -> usize {
        self.t_len * self.n_envs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn obs_at(&self, i: usize) -> &[f64] {
        &self.obs[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn action_at(&self, i: usize) -> &[f64] {
        &self.actions[i * self.action_width..(i + 1) * self.action_width]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let check = |name: &'static str, got: usize, expected: usize| {
            if got != expected {
                Err(Error::Dimension {
                    context: name,
                    expected,
                    got,
                })
            } else {
                Ok(())
            }
        };
        check("batch obs", self.obs.len(), n * self.obs_dim)?;
        check("batch actions", self.actions.len(), n * self.action_width)?;
        check("batch log-probs", self.behavior_log_probs.len(), n)?;
        check("batch rewards", self.rewards.len(), n)?;
        check("batch terminated", self.terminated.len(), n)?;
        check("batch truncated", self.truncated.len(), n)?;
        check("batch values", self.values.len(), n)?;
        check("batch truncation values", self.truncation_values.len(), n)?;
        check("batch bootstrap values", self.bootstrap_values.len(), self.n_envs)?;
        if self.behavior_log_probs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("behavior log-probs"));
        }
        Ok(())
    }
}

/// Runs `π(θ)` for `t_len` steps in every slot.
pub fn collect_rollout(
    model: &ActorCritic,
    theta: &ParamVector,
    envs: &mut VecEnv,
    t_len: usize,
    reward_scale: f64,
) -> Result<TransitionBatch> {
    if t_len == 0 || envs.is_empty() {
        return Err(Error::Config("rollout needs T >= 1 and N >= 1".into()));
    }
    let n = envs.len();
    let obs_dim = envs.env.spec().obs_dim;
    let action_width = model.head.action_width();
    let total = t_len * n;
    let mut b = TransitionBatch {
        t_len,
        n_envs: n,
        obs_dim,
        action_width,
        obs: Vec::with_capacity(total * obs_dim),
        actions: Vec::with_capacity(total * action_width),
        behavior_log_probs: Vec::with_capacity(total),
        rewards: Vec::with_capacity(total),
        raw_rewards: Vec::with_capacity(total),
        terminated: Vec::with_capacity(total),
        truncated: Vec::with_capacity(total),
        values: Vec::with_capacity(total),
        truncation_values: Vec::with_capacity(total),
        bootstrap_values: Vec::with_capacity(n),
        completed_returns: Vec::new(),
    };
    let th = theta.as_slice();
    for _ in 0..t_len {
        for slot in envs.slots.iter_mut() {
            let (action, log_prob, value) = model.act(th, &slot.obs, &mut slot.rng)?;
            let step = envs.env.step(&slot.state, &action)?;
            b.obs.extend_from_slice(&slot.obs);
            b.actions.extend_from_slice(&action);
            b.behavior_log_probs.push(log_prob);
            b.rewards.push(step.reward * reward_scale);
            b.raw_rewards.push(step.reward);
            b.terminated.push(step.terminated);
            b.truncated.push(step.truncated);
            b.values.push(value);
            slot.episode_return += step.reward;
            slot.episode_len += 1;
            if step.truncated {
                let v = model.value(th, &step.obs)?;
                if !v.is_finite() {
                    return Err(Error::NonFinite("value"));
                }
                b.truncation_values.push(v);
            } else {
                b.truncation_values.push(0.0);
            }
            if step.done() {
                b.completed_returns.push(slot.episode_return);
                let (state, obs) = envs.env.reset(slot.rng.next_u64());
                slot.state = state;
                slot.obs = obs;
                slot.episode_return = 0.0;
                slot.episode_len = 0;
            } else {
                slot.state = step.state;
                slot.obs = step.obs;
            }
        }
    }
    for slot in &envs.slots {
        let v = model.value(th, &slot.obs)?;
        if !v.is_finite() {
            return Err(Error::NonFinite("value"));
        }
        b.bootstrap_values.push(v);
    }
    Ok(b)
}
