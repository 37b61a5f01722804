//! Native episodic tasks behind one value-semantics interface.
//!
//! Every environment is a pure transition function over an [`EnvState`]:
//! `(state, action) -> (state', obs, reward, terminated, truncated)`.
//! All randomness comes from the state's own [`Stream`], seeded at reset.

mod cartpole;
mod chain;
mod maze;
mod pendulum;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::head::{discrete_index, PolicyHead};
use crate::rng::Stream;

pub use chain::{chain_value_iteration, CHAIN_LENGTH};
pub use maze::MAZE_ROWS;

pub const ENV_IDS: [&str; 4] = ["chain-mdp", "cartpole-discrete", "pendulum-continuous", "maze-grid"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionSpace {
    Discrete { n: usize },
    Box { dim: usize, low: f64, high: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub id: String,
    pub obs_dim: usize,
    pub action_space: ActionSpace,
    pub max_episode_steps: u32,
    pub reward_range_hint: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Chain,
    Cartpole,
    Pendulum,
    Maze,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub internal: Vec<f64>,
    pub steps_elapsed: u32,
    pub rng: Stream,
    /// Continuous actions clamped into bounds so far.
    pub clamp_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: EnvState,
    pub obs: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

impl Step {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Debug, Clone)]
pub struct Env {
    kind: Kind,
    spec: EnvSpec,
}

impl Env {
    pub fn make(id: &str) -> Result<Env> {
        let (kind, spec) = match id {
            "chain-mdp" => (Kind::Chain, chain::spec()),
            "cartpole-discrete" => (Kind::Cartpole, cartpole::spec()),
            "pendulum-continuous" => (Kind::Pendulum, pendulum::spec()),
            "maze-grid" => (Kind::Maze, maze::spec()),
            _ => return Err(Error::UnknownEnv(id.to_string())),
        };
        Ok(Env { kind, spec })
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn id(&self) -> &str {
        &self.spec.id
    }

    pub fn policy_head(&self) -> PolicyHead {
        match self.spec.action_space {
            ActionSpace::Discrete { n } => PolicyHead::Categorical { n },
            ActionSpace::Box { dim, .. } => PolicyHead::DiagonalGaussian { action_dim: dim },
        }
    }

    /// Largest achievable undiscounted episode return, where known exactly.
    pub fn max_return(&self) -> Option<f64> {
        match self.kind {
            Kind::Chain => Some(chain_value_iteration(CHAIN_LENGTH, self.spec.max_episode_steps, 1.0)),
            Kind::Cartpole => Some(self.spec.max_episode_steps as f64),
            Kind::Maze => Some(1.0),
            Kind::Pendulum => Some(0.0),
        }
    }

    pub fn reset(&self, seed: u64) -> (EnvState, Vec<f64>) {
        let mut rng = Stream::new(seed);
        let internal = match self.kind {
            Kind::Chain => chain::reset(),
            Kind::Cartpole => cartpole::reset(&mut rng),
            Kind::Pendulum => pendulum::reset(&mut rng),
            Kind::Maze => maze::reset(&mut rng),
        };
        let obs = self.observe(&internal);
        (
            EnvState {
                internal,
                steps_elapsed: 0,
                rng,
                clamp_count: 0,
            },
            obs,
        )
    }

    pub fn observe(&self, internal: &[f64]) -> Vec<f64> {
        match self.kind {
            Kind::Chain => chain::observe(internal),
            Kind::Cartpole => internal.to_vec(),
            Kind::Pendulum => pendulum::observe(internal),
            Kind::Maze => maze::observe(internal),
        }
    }

    pub fn step(&self, state: &EnvState, action: &[f64]) -> Result<Step> {
        let mut next = state.clone();
        let (reward, terminated) = match self.spec.action_space {
            ActionSpace::Discrete { n } => {
                let a = discrete_index(action, n)?;
                match self.kind {
                    Kind::Chain => chain::step(&mut next.internal, a),
                    Kind::Cartpole => cartpole::step(&mut next.internal, a),
                    Kind::Maze => maze::step(&mut next.internal, a),
                    Kind::Pendulum => unreachable!("pendulum has a box action space"),
                }
            }
            ActionSpace::Box { dim, low, high } => {
                if action.len() != dim {
                    return Err(Error::InvalidAction(format!(
                        "expected {dim}-dim action, got {}",
                        action.len()
                    )));
                }
                if action.iter().any(|a| !a.is_finite()) {
                    return Err(Error::InvalidAction(format!("non-finite action {action:?}")));
                }
                let clamped: Vec<f64> = action.iter().map(|a| a.clamp(low, high)).collect();
                if clamped != action {
                    next.clamp_count += 1;
                }
                pendulum::step(&mut next.internal, clamped[0])
            }
        };
        next.steps_elapsed += 1;
        let truncated = !terminated && next.steps_elapsed >= self.spec.max_episode_steps;
        let obs = self.observe(&next.internal);
        Ok(Step {
            state: next,
            obs,
            reward,
            terminated,
            truncated,
        })
    }
}
