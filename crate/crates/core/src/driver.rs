//! Seeded end-to-end training: the outer loop, scheduled evaluations,
//! best-policy tracking and the final absolute evaluation.
//!
//! Random streams are derived from `seed` by name: `init` for the initial
//! parameters, `envs` for the env slots and `shuffle` for minibatching.
//! Evaluation draws from its own root (`eval_seed`, or `seed` split by
//! `eval`), so evaluating never perturbs training.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::env::Env;
use crate::error::{Error, Result};
use crate::gae::compute_gae;
use crate::inner::{inner_optimization_loop, InnerOptimizers};
use crate::model::ActorCritic;
use crate::outer::{biased_iteration_bias, outer_step, OuterState};
use crate::params::ParamVector;
use crate::rng::Stream;
use crate::rollout::{collect_rollout, VecEnv};

/// Tag of the absolute-evaluation stream under the eval root.
const ABSOLUTE_EVAL_TAG: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u64,
    pub transitions: u64,
    pub outer_grad_norm: f64,
    pub step_norm: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub clip_fraction: f64,
    pub active_fraction: f64,
    pub mean_ratio: f64,
    pub entropy: f64,
    pub actor_lr: f64,
    /// Mean raw return of episodes finished during collection, if any.
    pub train_return: Option<f64>,
    /// FNV-1a hash of the bit patterns of θ_{k+1}.
    pub theta_fingerprint: String,
}

/// State of the outer optimizer after one update. Kept apart from
/// [`IterationRecord`] because equivalent strategies can carry different
/// momentum buffers while producing identical parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub iteration: u64,
    pub strategy: String,
    pub outer_grad_norm: f64,
    pub momentum_norm: f64,
    pub effective_lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub index: usize,
    pub iteration: u64,
    pub transitions: u64,
    pub mean_return: f64,
    pub episodes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Iteration(IterationRecord),
    Outer(OuterRecord),
    Eval(EvalPoint),
    Aborted { iteration: u64, reason: String },
    Absolute { best_index: usize, mean_return: f64, episodes: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub eval_points: Vec<EvalPoint>,
    pub best_index: Option<usize>,
    pub best_theta: Option<ParamVector>,
    pub final_theta: ParamVector,
    /// Empty unless the run completed.
    pub absolute_returns: Vec<f64>,
    pub completed: bool,
    pub nan_aborted: bool,
    pub diagnostics: Vec<IterationRecord>,
}

impl RunResult {
    pub fn absolute_mean(&self) -> Option<f64> {
        if self.absolute_returns.is_empty() {
            None
        } else {
            Some(mean(&self.absolute_returns))
        }
    }

    pub fn best_eval_mean(&self) -> Option<f64> {
        self.best_index.map(|i| self.eval_points[i].mean_return)
    }

    pub fn final_eval_mean(&self) -> Option<f64> {
        self.eval_points.last().map(|p| p.mean_return)
    }
}

/// Compact per-run record written next to the run outputs. Also the line
/// format of score files consumed by the metrics tools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: String,
    pub task: String,
    pub seed: u64,
    /// Mean absolute-evaluation return of the best policy.
    pub score: Option<f64>,
    pub completed: bool,
    pub nan_aborted: bool,
    pub iterations: u64,
    pub best_eval_mean: Option<f64>,
    pub final_eval_mean: Option<f64>,
    /// `(transitions, mean return)` per eval point.
    pub curve: Vec<(u64, f64)>,
}

impl RunSummary {
    pub fn new(cfg: &RunConfig, result: &RunResult) -> Self {
        RunSummary {
            method: cfg.label.clone(),
            task: cfg.env.clone(),
            seed: cfg.seed,
            score: result.absolute_mean(),
            completed: result.completed,
            nan_aborted: result.nan_aborted,
            iterations: result.diagnostics.len() as u64,
            best_eval_mean: result.best_eval_mean(),
            final_eval_mean: result.final_eval_mean(),
            curve: result.eval_points.iter().map(|p| (p.transitions, p.mean_return)).collect(),
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// FNV-1a over the little-endian bytes of every element.
pub fn fingerprint(xs: &[f64]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for x in xs {
        for b in x.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

/// Runs `episodes` full episodes with actions sampled from π(θ) and returns
/// their raw returns. Episode `e` draws its reset seed and actions from
/// `Stream::new(eval_seed).split(e)`.
pub fn evaluate_policy(model: &ActorCritic, env: &Env, theta: &ParamVector, episodes: u64, eval_seed: u64) -> Result<Vec<f64>> {
    if episodes == 0 {
        return Err(Error::Config("evaluation needs at least one episode".into()));
    }
    let root = Stream::new(eval_seed);
    let th = theta.as_slice();
    let mut returns = Vec::with_capacity(episodes as usize);
    for e in 0..episodes {
        let mut rng = root.split(e);
        let (mut state, mut obs) = env.reset(rng.next_u64());
        let mut total = 0.0;
        loop {
            let pe = model.policy(th, &obs)?;
            let action = model.head.sample(&pe.dist_params, &mut rng)?;
            let step = env.step(&state, &action)?;
            total += step.reward;
            if step.done() {
                break;
            }
            state = step.state;
            obs = step.obs;
        }
        if !total.is_finite() {
            return Err(Error::NonFinite("evaluation return"));
        }
        returns.push(total);
    }
    Ok(returns)
}

/// Iteration counts after which an evaluation runs. Always starts with 0
/// (the initial policy) and ends with `total_iterations`.
pub fn eval_schedule(total_iterations: u64, num_evals: u64) -> Vec<u64> {
    let mut out = vec![0];
    for j in 1..=num_evals {
        let it = (j * total_iterations).div_ceil(num_evals);
        if it > *out.last().expect("non-empty") {
            out.push(it);
        }
    }
    out
}

/// Resumable training state. Drive it with [`Trainer::run_until`] and
/// finish with [`Trainer::finish`].
#[derive(Debug, Clone)]
pub struct Trainer {
    pub(crate) cfg: RunConfig,
    pub(crate) env: Env,
    pub(crate) model: ActorCritic,
    pub(crate) theta: ParamVector,
    pub(crate) outer: OuterState,
    pub(crate) opt: InnerOptimizers,
    pub(crate) envs: VecEnv,
    pub(crate) shuffle_rng: Stream,
    pub(crate) iteration: u64,
    pub(crate) eval_points: Vec<EvalPoint>,
    pub(crate) best: Option<(usize, ParamVector)>,
    pub(crate) diagnostics: Vec<IterationRecord>,
    pub(crate) nan_aborted: bool,
}

impl Trainer {
    pub fn new(cfg: RunConfig) -> Result<Trainer> {
        cfg.validate()?;
        let env = Env::make(&cfg.env)?;
        let model = ActorCritic::for_env(&env, &cfg.network)?;
        let root = Stream::new(cfg.seed);
        let theta = model.init_params(&mut root.split_named("init"));
        let outer = OuterState::new(cfg.outer, &theta)?;
        let opt = cfg.ppo.make_optimizers(&model, cfg.total_iterations());
        let envs = VecEnv::from_root(env.clone(), &root.split_named("envs"), cfg.ppo.num_envs);
        Ok(Trainer {
            shuffle_rng: root.split_named("shuffle"),
            cfg,
            env,
            model,
            theta,
            outer,
            opt,
            envs,
            iteration: 0,
            eval_points: Vec::new(),
            best: None,
            diagnostics: Vec::new(),
            nan_aborted: false,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn model(&self) -> &ActorCritic {
        &self.model
    }

    pub fn theta(&self) -> &ParamVector {
        &self.theta
    }

    pub fn outer_state(&self) -> &OuterState {
        &self.outer
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn total_iterations(&self) -> u64 {
        self.cfg.total_iterations()
    }

    pub fn nan_aborted(&self) -> bool {
        self.nan_aborted
    }

    pub fn is_done(&self) -> bool {
        self.nan_aborted || self.iteration >= self.total_iterations()
    }

    pub fn eval_root(&self) -> u64 {
        self.cfg
            .eval_seed
            .unwrap_or_else(|| Stream::new(self.cfg.seed).split_named("eval").next_u64())
    }

    /// Seed of the final evaluation of the best policy.
    pub fn absolute_eval_seed(&self) -> u64 {
        self.eval_seed_for(ABSOLUTE_EVAL_TAG)
    }

    fn eval_seed_for(&self, tag: u64) -> u64 {
        Stream::new(self.eval_root()).split(tag).next_u64()
    }

    /// Runs outer iterations until `target` (clamped to the budget) or an
    /// abort, emitting events as it goes.
    pub fn run_until(&mut self, target: u64, observer: &mut dyn FnMut(&Event)) -> Result<()> {
        let target = target.min(self.total_iterations());
        let schedule = eval_schedule(self.total_iterations(), self.cfg.num_intermediate_evals);
        if self.eval_points.is_empty() && !self.nan_aborted {
            self.evaluate_point(observer)?;
        }
        while self.iteration < target && !self.nan_aborted {
            match self.iterate() {
                Ok((rec, outer)) => {
                    observer(&Event::Iteration(rec));
                    observer(&Event::Outer(outer));
                }
                Err(e) if e.is_numerical() => {
                    self.nan_aborted = true;
                    observer(&Event::Aborted {
                        iteration: self.iteration,
                        reason: e.to_string(),
                    });
                    break;
                }
                Err(e) => return Err(e),
            }
            if schedule.binary_search(&self.iteration).is_ok() {
                self.evaluate_point(observer)?;
            }
        }
        Ok(())
    }

    pub fn run(&mut self, observer: &mut dyn FnMut(&Event)) -> Result<()> {
        self.run_until(self.total_iterations(), observer)
    }

    fn evaluate_point(&mut self, observer: &mut dyn FnMut(&Event)) -> Result<()> {
        let index = self.eval_points.len();
        let seed = self.eval_seed_for(index as u64);
        let episodes = self.cfg.eval_episodes_intermediate;
        let returns = match evaluate_policy(&self.model, &self.env, &self.theta, episodes, seed) {
            Ok(r) => r,
            Err(e) if e.is_numerical() => {
                self.nan_aborted = true;
                observer(&Event::Aborted {
                    iteration: self.iteration,
                    reason: e.to_string(),
                });
                return Ok(());
            }
            Err(e) => return Err(e),
        };
        let point = EvalPoint {
            index,
            iteration: self.iteration,
            transitions: self.iteration * self.cfg.ppo.batch_size() as u64,
            mean_return: mean(&returns),
            episodes,
        };
        let better = match &self.best {
            None => true,
            Some((b, _)) => point.mean_return > self.eval_points[*b].mean_return,
        };
        if better {
            self.best = Some((index, self.theta.clone()));
        }
        observer(&Event::Eval(point.clone()));
        self.eval_points.push(point);
        Ok(())
    }

    fn iterate(&mut self) -> Result<(IterationRecord, OuterRecord)> {
        let ppo = &self.cfg.ppo;
        let batch = collect_rollout(&self.model, &self.theta, &mut self.envs, ppo.rollout_len, ppo.reward_scale)?;
        let adv = compute_gae(&batch, ppo.gamma, ppo.gae_lambda)?;
        let theta_init = biased_iteration_bias(&self.theta, &self.outer)?;
        if self.cfg.reset_inner_optimizer {
            self.opt.reset_moments();
        }
        let (theta_star, diag) = inner_optimization_loop(
            &self.model,
            &theta_init,
            &batch,
            &adv,
            ppo,
            &mut self.opt,
            &mut self.shuffle_rng,
        )?;
        let out = outer_step(&mut self.outer, &self.theta, &theta_star)?;
        self.theta = out.theta_next;
        self.iteration += 1;
        let rec = IterationRecord {
            iteration: self.iteration,
            transitions: self.iteration * ppo.batch_size() as u64,
            outer_grad_norm: out.outer_grad_norm,
            step_norm: out.step_norm,
            policy_loss: diag.policy_loss,
            value_loss: diag.value_loss,
            clip_fraction: diag.clip_fraction,
            active_fraction: diag.active_fraction,
            mean_ratio: diag.mean_ratio,
            entropy: diag.entropy,
            actor_lr: diag.actor_lr,
            train_return: (!batch.completed_returns.is_empty()).then(|| mean(&batch.completed_returns)),
            theta_fingerprint: fingerprint(self.theta.as_slice()),
        };
        let outer = OuterRecord {
            iteration: self.iteration,
            strategy: self.cfg.outer.label().into(),
            outer_grad_norm: out.outer_grad_norm,
            momentum_norm: out.momentum_norm,
            effective_lr: self.cfg.outer.effective_lr(),
        };
        self.diagnostics.push(rec.clone());
        Ok((rec, outer))
    }

    /// Evaluates the best policy (if the run completed) and packages results.
    pub fn finish(self, observer: &mut dyn FnMut(&Event)) -> Result<RunResult> {
        let completed = !self.nan_aborted && self.iteration >= self.total_iterations() && self.best.is_some();
        let mut absolute_returns = Vec::new();
        let mut nan_aborted = self.nan_aborted;
        if completed {
            let (best_index, best_theta) = self.best.as_ref().expect("completed run has a best policy");
            let seed = self.absolute_eval_seed();
            match evaluate_policy(&self.model, &self.env, best_theta, self.cfg.absolute_eval_episodes, seed) {
                Ok(r) => {
                    observer(&Event::Absolute {
                        best_index: *best_index,
                        mean_return: mean(&r),
                        episodes: self.cfg.absolute_eval_episodes,
                    });
                    absolute_returns = r;
                }
                Err(e) if e.is_numerical() => nan_aborted = true,
                Err(e) => return Err(e),
            }
        }
        Ok(RunResult {
            eval_points: self.eval_points,
            best_index: self.best.as_ref().map(|b| b.0),
            best_theta: self.best.map(|b| b.1),
            final_theta: self.theta,
            completed: completed && !nan_aborted,
            absolute_returns,
            nan_aborted,
            diagnostics: self.diagnostics,
        })
    }
}

/// Runs a whole configuration.
pub fn train(cfg: &RunConfig) -> Result<RunResult> {
    train_with(cfg, &mut |_| {})
}

pub fn train_with(cfg: &RunConfig, observer: &mut dyn FnMut(&Event)) -> Result<RunResult> {
    let mut t = Trainer::new(cfg.clone())?;
    t.run(observer)?;
    t.finish(observer)
}
