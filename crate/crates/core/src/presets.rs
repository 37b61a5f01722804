//! Named configurations: tuned per-task baselines and outer-update optima
//! for the Brax, Jumanji and MinAtar suites, the standard outer sweeps, and
//! small runs for the native environments.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::inner::{PpoConfig, SEARCH_RANGES};
use crate::model::NetworkConfig;
use crate::outer::OuterStrategy;
use crate::sweep::{Axis, Objective, RandomAxis, RandomSearch, Scale, SweepSpec};

/// Tuned PPO hyperparameters for one benchmark task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskPreset {
    pub task: String,
    pub suite: String,
    pub ppo: PpoConfig,
}

/// Best setting of each outer-update method for one benchmark task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuterOptima {
    pub task: String,
    pub outer_lr: OuterStrategy,
    pub outer_nesterov: OuterStrategy,
    pub biased_init: OuterStrategy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", content = "value", rename_all = "snake_case")]
pub enum Preset {
    Task(TaskPreset),
    Outer(OuterOptima),
    Sweep(Box<SweepSpec>),
    Run(Box<RunConfig>),
}

impl Preset {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("preset serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Preset> {
        Ok(serde_json::from_str(text)?)
    }
}

// task, suite, envs, rollout, epochs, minibatches, actor lr, critic lr,
// gamma, lambda, clip eps, max grad norm, reward scale
type Row = (&'static str, &'static str, usize, usize, usize, usize, f64, f64, f64, f64, f64, f64, f64);

const BASELINES: [Row; 14] = [
    ("ant", "brax", 128, 8, 2, 32, 3.0e-4, 1.4e-4, 0.98, 0.70, 0.21, 4.85, 0.14),
    ("halfcheetah", "brax", 64, 64, 3, 16, 3.9e-4, 4.4e-4, 0.99, 0.94, 0.13, 2.40, 0.46),
    ("hopper", "brax", 64, 64, 2, 64, 6.3e-4, 3.6e-4, 1.00, 0.96, 0.17, 3.54, 3.95),
    ("humanoid", "brax", 256, 64, 4, 64, 1.0e-4, 1.0e-4, 0.98, 0.89, 0.34, 3.30, 0.14),
    ("humanoidstandup", "brax", 64, 64, 3, 32, 3.0e-4, 8.2e-4, 0.99, 0.98, 0.10, 4.65, 0.35),
    ("walker2d", "brax", 256, 32, 4, 64, 5.4e-4, 8.2e-4, 1.00, 0.92, 0.12, 3.74, 22.54),
    ("asterix", "minatar", 128, 128, 3, 64, 8.3e-4, 2.1e-5, 1.00, 0.20, 0.30, 2.28, 6.62),
    ("breakout", "minatar", 64, 16, 14, 16, 1.8e-4, 1.2e-4, 0.90, 0.53, 0.16, 0.25, 5.19),
    ("freeway", "minatar", 64, 128, 10, 2, 6.9e-4, 1.3e-4, 0.98, 0.70, 0.15, 4.71, 6.64),
    ("space-invaders", "minatar", 128, 32, 16, 2, 3.0e-5, 1.1e-4, 0.98, 1.00, 0.25, 0.35, 0.61),
    ("game-2048", "jumanji", 1024, 8, 9, 32, 4.9e-4, 3.8e-4, 0.99, 0.04, 0.28, 2.56, 0.13),
    ("maze", "jumanji", 256, 32, 7, 64, 6.5e-4, 4.3e-4, 0.98, 0.66, 0.14, 2.46, 1.97),
    ("rubiks-cube", "jumanji", 64, 256, 13, 4, 9.0e-4, 2.2e-4, 0.99, 0.55, 0.14, 3.45, 11.03),
    ("snake", "jumanji", 1024, 8, 11, 4, 6.0e-4, 6.0e-4, 1.00, 0.46, 0.12, 2.52, 20.48),
];

// task, outer lr sigma, nesterov (sigma, mu), biased (alpha, mu)
const OUTER_OPTIMA: [(&str, f64, (f64, f64), (f64, f64)); 14] = [
    ("ant", 0.5, (0.7, 0.2), (0.1, 0.8)),
    ("halfcheetah", 0.5, (0.4, 0.5), (0.2, 0.8)),
    ("hopper", 1.5, (0.9, 0.4), (0.5, 0.8)),
    ("humanoid", 1.9, (0.5, 0.7), (0.1, 0.4)),
    ("humanoidstandup", 2.1, (0.5, 0.3), (0.5, 0.8)),
    ("walker2d", 2.0, (0.9, 0.6), (0.4, 0.0)),
    ("game-2048", 1.3, (0.8, 0.4), (0.3, 0.9)),
    ("snake", 2.3, (1.0, 0.4), (0.7, 0.5)),
    ("rubiks-cube", 1.7, (0.5, 0.7), (0.4, 0.3)),
    ("maze", 0.9, (0.9, 0.0), (0.1, 0.5)),
    ("asterix", 1.1, (0.6, 0.5), (0.1, 0.4)),
    ("breakout", 1.1, (0.9, 0.1), (0.0, 0.5)),
    ("freeway", 1.6, (0.9, 0.3), (0.2, 0.5)),
    ("space-invaders", 1.3, (0.8, 0.2), (0.1, 0.9)),
];

pub fn task_names() -> impl Iterator<Item = &'static str> {
    BASELINES.iter().map(|r| r.0)
}

pub fn task_preset(task: &str) -> Option<TaskPreset> {
    BASELINES.iter().find(|r| r.0 == task).map(|r| TaskPreset {
        task: r.0.into(),
        suite: r.1.into(),
        ppo: PpoConfig {
            num_envs: r.2,
            rollout_len: r.3,
            num_epochs: r.4,
            num_minibatches: r.5,
            actor_lr: r.6,
            critic_lr: r.7,
            gamma: r.8,
            gae_lambda: r.9,
            clip_eps: r.10,
            max_grad_norm: r.11,
            reward_scale: r.12,
            value_clip_eps: None,
            anneal_lr: true,
            normalize_advantages: true,
        },
    })
}

pub fn outer_optima(task: &str) -> Option<OuterOptima> {
    OUTER_OPTIMA.iter().find(|r| r.0 == task).map(|&(t, s, (ns, nm), (ba, bm))| OuterOptima {
        task: t.into(),
        outer_lr: OuterStrategy::OuterLr { sigma: s },
        outer_nesterov: OuterStrategy::OuterNesterov { sigma: ns, mu: nm },
        biased_init: OuterStrategy::BiasedInit { alpha: ba, mu: bm },
    })
}

/// `{lo/10, ..., hi/10}` built from integers so every value is the nearest
/// double to its decimal.
pub fn tenths(lo: u32, hi: u32) -> Vec<f64> {
    (lo..=hi).map(|i| f64::from(i) / 10.0).collect()
}

fn axis(path: &str, values: Vec<f64>) -> Axis {
    Axis {
        path: path.into(),
        values: values.into_iter().map(Value::from).collect(),
    }
}

fn desk_run(env: &str, ppo: PpoConfig, hidden: Vec<usize>, budget: u64) -> RunConfig {
    RunConfig {
        label: "ppo".into(),
        env: env.into(),
        ppo,
        outer: OuterStrategy::Standard,
        network: NetworkConfig {
            hidden,
            ..NetworkConfig::default()
        },
        total_transitions: budget,
        num_intermediate_evals: 10,
        eval_episodes_intermediate: 16,
        absolute_eval_episodes: 128,
        seed: 0,
        eval_seed: None,
        reset_inner_optimizer: false,
    }
}

fn desk_ppo() -> PpoConfig {
    PpoConfig {
        num_envs: 8,
        rollout_len: 128,
        num_epochs: 4,
        num_minibatches: 4,
        actor_lr: 1e-3,
        critic_lr: 1e-3,
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

pub fn desk_preset(name: &str) -> Option<RunConfig> {
    Some(match name {
        "chain-desk" => desk_run("chain-mdp", desk_ppo(), vec![32, 32], 100_000),
        "cartpole-desk" => desk_run("cartpole-discrete", desk_ppo(), vec![32, 32], 300_000),
        "cartpole-small-clip" => desk_run(
            "cartpole-discrete",
            PpoConfig {
                clip_eps: 0.1,
                ..desk_ppo()
            },
            vec![32, 32],
            100_000,
        ),
        "pendulum-desk" => desk_run(
            "pendulum-continuous",
            PpoConfig {
                reward_scale: 0.1,
                ..desk_ppo()
            },
            vec![32, 32],
            400_000,
        ),
        "maze-desk" => desk_run("maze-grid", desk_ppo(), vec![32, 32], 200_000),
        _ => return None,
    })
}

const DESK: [&str; 5] = ["chain-desk", "cartpole-desk", "cartpole-small-clip", "pendulum-desk", "maze-desk"];

fn grid_spec(name: &str, outer: OuterStrategy, axes: Vec<Axis>) -> SweepSpec {
    let mut base = desk_preset("cartpole-small-clip").expect("desk preset exists");
    base.outer = outer;
    base.label = outer.label().into();
    SweepSpec {
        name: name.into(),
        base,
        axes,
        random: None,
        seeds_per_trial: 4,
        objective: Objective::FinalEvalMean,
        root_seed: 0,
    }
}

pub fn sweep_preset(name: &str) -> Option<SweepSpec> {
    Some(match name {
        "outer-lr-grid" => grid_spec(name, OuterStrategy::OuterLr { sigma: 1.0 }, vec![axis("outer.sigma", tenths(1, 40))]),
        "outer-nesterov-grid" => grid_spec(
            name,
            OuterStrategy::OuterNesterov { sigma: 1.0, mu: 0.0 },
            vec![axis("outer.sigma", tenths(1, 10)), axis("outer.mu", tenths(1, 9))],
        ),
        "biased-init-grid" => grid_spec(
            name,
            OuterStrategy::BiasedInit { alpha: 0.0, mu: 0.0 },
            vec![axis("outer.alpha", tenths(1, 10)), axis("outer.mu", tenths(0, 9))],
        ),
        "baseline-search" => {
            let base = desk_preset("cartpole-desk").expect("desk preset exists");
            let axes = SEARCH_RANGES
                .iter()
                .map(|&(field, low, high, log)| RandomAxis {
                    path: format!("ppo.{field}"),
                    low,
                    high,
                    scale: match field {
                        "num_envs" | "rollout_len" | "num_minibatches" => Scale::PowerOfTwo,
                        "num_epochs" => Scale::Integer,
                        _ if log => Scale::Log,
                        _ => Scale::Linear,
                    },
                })
                .collect();
            SweepSpec {
                name: name.into(),
                base,
                axes: Vec::new(),
                random: Some(RandomSearch { trials: 64, axes }),
                seeds_per_trial: 4,
                objective: Objective::FinalEvalMean,
                root_seed: 0,
            }
        }
        _ => return None,
    })
}

const SWEEPS: [&str; 4] = ["outer-lr-grid", "outer-nesterov-grid", "biased-init-grid", "baseline-search"];

/// Every preset name, grouped as baselines, outer optima, sweeps, desk runs.
pub fn preset_names() -> Vec<String> {
    let mut out: Vec<String> = task_names().map(|t| format!("{t}-baseline")).collect();
    out.extend(task_names().map(|t| format!("{t}-outer")));
    out.extend(SWEEPS.iter().map(|s| s.to_string()));
    out.extend(DESK.iter().map(|s| s.to_string()));
    out
}

pub fn preset(name: &str) -> Result<Preset> {
    if let Some(t) = name.strip_suffix("-baseline").and_then(task_preset) {
        return Ok(Preset::Task(t));
    }
    if let Some(o) = name.strip_suffix("-outer").and_then(outer_optima) {
        return Ok(Preset::Outer(o));
    }
    if let Some(s) = sweep_preset(name) {
        return Ok(Preset::Sweep(Box::new(s)));
    }
    if let Some(r) = desk_preset(name) {
        return Ok(Preset::Run(Box::new(r)));
    }
    Err(Error::Config(format!(
        "unknown preset `{name}`; available: {}",
        preset_names().join(", ")
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_is_valid() {
        for name in preset_names() {
            match preset(&name).unwrap() {
                Preset::Task(t) => t.ppo.validate().unwrap(),
                Preset::Outer(o) => {
                    for s in [o.outer_lr, o.outer_nesterov, o.biased_init] {
                        s.validate().unwrap();
                    }
                }
                Preset::Sweep(s) => {
                    s.trials().unwrap();
                }
                Preset::Run(r) => r.validate().unwrap(),
            }
        }
    }

    #[test]
    fn baselines_sit_inside_search_ranges() {
        for t in task_names() {
            assert!(task_preset(t).unwrap().ppo.out_of_search_ranges().is_empty(), "{t}");
        }
    }

    #[test]
    fn unknown_lists_alternatives() {
        let e = preset("nope").unwrap_err().to_string();
        assert!(e.contains("ant-baseline") && e.contains("outer-lr-grid"));
    }
}
