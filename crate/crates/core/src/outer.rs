//! Outer-loop updates applied to the outer gradient `g = θ* - θ_k`.
//!
//! Every strategy operates on the full actor+critic vector. The momentum
//! buffer starts at zero and is only touched by the momentum strategies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OuterStrategy {
    /// `θ_{k+1} = θ_k + g`, i.e. plain PPO.
    Standard,
    /// `θ_{k+1} = θ_k + σ g`.
    OuterLr { sigma: f64 },
    /// `m_k = μ m_{k-1} + g`, `θ_{k+1} = θ_k + σ (m_k + μ g)`.
    OuterNesterov { sigma: f64, mu: f64 },
    /// Inner loop starts from `θ_k + α m_{k-1}`; then
    /// `θ_{k+1} = θ_k + g` and `m_k = μ m_{k-1} + (1 - μ) g`.
    BiasedInit { alpha: f64, mu: f64 },
}

impl Default for OuterStrategy {
    fn default() -> Self {
        OuterStrategy::Standard
    }
}

impl OuterStrategy {
    pub fn validate(&self) -> Result<()> {
        let check_sigma = |s: f64| {
            if s.is_finite() && s > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("outer sigma must be positive, got {s}")))
            }
        };
        let check_mu = |m: f64| {
            if (0.0..1.0).contains(&m) {
                Ok(())
            } else {
                Err(Error::Config(format!("outer mu must lie in [0, 1), got {m}")))
            }
        };
        match *self {
            OuterStrategy::Standard => Ok(()),
            OuterStrategy::OuterLr { sigma } => check_sigma(sigma),
            OuterStrategy::OuterNesterov { sigma, mu } => {
                check_sigma(sigma)?;
                check_mu(mu)
            }
            OuterStrategy::BiasedInit { alpha, mu } => {
                if !(alpha.is_finite() && alpha >= 0.0) {
                    return Err(Error::Config(format!("outer alpha must be >= 0, got {alpha}")));
                }
                check_mu(mu)
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            OuterStrategy::Standard => "standard",
            OuterStrategy::OuterLr { .. } => "outer-lr",
            OuterStrategy::OuterNesterov { .. } => "nesterov",
            OuterStrategy::BiasedInit { .. } => "biased-init",
        }
    }

    /// Long-run step size on a constant outer gradient.
    pub fn effective_lr(&self) -> f64 {
        match *self {
            OuterStrategy::Standard | OuterStrategy::BiasedInit { .. } => 1.0,
            OuterStrategy::OuterLr { sigma } => sigma,
            OuterStrategy::OuterNesterov { sigma, mu } => sigma / (1.0 - mu),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterState {
    pub strategy: OuterStrategy,
    pub momentum: ParamVector,
    /// Outer updates applied so far.
    pub iteration: u64,
}

impl OuterState {
    pub fn new(strategy: OuterStrategy, like: &ParamVector) -> Result<Self> {
        strategy.validate()?;
        Ok(OuterState {
            strategy,
            momentum: ParamVector::zeros(like.layout().clone()),
            iteration: 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterStepOutcome {
    pub theta_next: ParamVector,
    pub outer_grad_norm: f64,
    pub step_norm: f64,
    pub momentum_norm: f64,
}

/// `θ* - θ_k`.
pub fn outer_gradient(theta_k: &ParamVector, theta_star: &ParamVector) -> Result<ParamVector> {
    theta_star.sub(theta_k)
}

pub fn apply_standard(theta_k: &ParamVector, g: &ParamVector) -> Result<ParamVector> {
    theta_k.add(g)
}

pub fn apply_outer_lr(theta_k: &ParamVector, g: &ParamVector, sigma: f64) -> Result<ParamVector> {
    let mut out = theta_k.clone();
    theta_k.check_layout(g)?;
    for (o, gi) in out.as_mut_slice().iter_mut().zip(g.as_slice()) {
        *o += sigma * gi;
    }
    Ok(out)
}

/// Updates `momentum` in place and returns `θ_{k+1}`.
pub fn apply_outer_nesterov(
    momentum: &mut ParamVector,
    theta_k: &ParamVector,
    g: &ParamVector,
    sigma: f64,
    mu: f64,
) -> Result<ParamVector> {
    theta_k.check_layout(g)?;
    momentum.check_layout(g)?;
    let mut out = theta_k.clone();
    for ((o, m), gi) in out
        .as_mut_slice()
        .iter_mut()
        .zip(momentum.as_mut_slice())
        .zip(g.as_slice())
    {
        *m = mu * *m + gi;
        *o += sigma * (*m + mu * gi);
    }
    Ok(out)
}

/// Starting point of the inner loop for this iteration. Equals `θ_k` for
/// every strategy except biased initialization.
pub fn biased_iteration_bias(theta_k: &ParamVector, state: &OuterState) -> Result<ParamVector> {
    match state.strategy {
        OuterStrategy::BiasedInit { alpha, .. } => {
            theta_k.check_layout(&state.momentum)?;
            let mut out = theta_k.clone();
            for (o, m) in out.as_mut_slice().iter_mut().zip(state.momentum.as_slice()) {
                *o += alpha * m;
            }
            Ok(out)
        }
        _ => Ok(theta_k.clone()),
    }
}

/// Applies one outer update given the inner-loop result.
pub fn outer_step(state: &mut OuterState, theta_k: &ParamVector, theta_star: &ParamVector) -> Result<OuterStepOutcome> {
    let g = outer_gradient(theta_k, theta_star)?;
    let theta_next = match state.strategy {
        OuterStrategy::Standard => apply_standard(theta_k, &g)?,
        OuterStrategy::OuterLr { sigma } => apply_outer_lr(theta_k, &g, sigma)?,
        OuterStrategy::OuterNesterov { sigma, mu } => apply_outer_nesterov(&mut state.momentum, theta_k, &g, sigma, mu)?,
        OuterStrategy::BiasedInit { mu, .. } => {
            for (m, gi) in state.momentum.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *m = mu * *m + (1.0 - mu) * gi;
            }
            apply_standard(theta_k, &g)?
        }
    };
    if !theta_next.is_finite() || !state.momentum.is_finite() {
        return Err(Error::NonFinite("outer update"));
    }
    state.iteration += 1;
    let step_norm = theta_next.sub(theta_k)?.norm();
    Ok(OuterStepOutcome {
        outer_grad_norm: g.norm(),
        step_norm,
        momentum_norm: state.momentum.norm(),
        theta_next,
    })
}
