//! Separate actor and critic networks packed into one parameter vector
//! θ = (θ^π, θ^V).

use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::head::{HeadEval, PolicyHead};
use crate::mlp::{Activation, MlpSpec, Tape};
use crate::params::{Layout, ParamVector};
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            hidden: vec![64, 64],
            activation: Activation::Tanh,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ActorCritic {
    pub head: PolicyHead,
    pub actor: MlpSpec,
    pub critic: MlpSpec,
    layout: Arc<Layout>,
    actor_range: Range<usize>,
    log_std_range: Option<Range<usize>>,
    critic_range: Range<usize>,
}

/// Output of the policy for one observation.
#[derive(Debug, Clone)]
pub struct PolicyEval {
    pub dist_params: Vec<f64>,
    pub tape: Tape,
}

impl ActorCritic {
    pub fn for_env(env: &crate::env::Env, net: &NetworkConfig) -> Result<Self> {
        Self::new(env.spec().obs_dim, env.policy_head(), net)
    }

    pub fn new(obs_dim: usize, head: PolicyHead, net: &NetworkConfig) -> Result<Self> {
        let actor = MlpSpec::new(obs_dim, net.hidden.clone(), head.net_output_dim(), net.activation);
        let critic = MlpSpec::new(obs_dim, net.hidden.clone(), 1, net.activation);
        actor.validate()?;
        critic.validate()?;
        let mut layout = Layout::new();
        let actor_range = actor.push_segments(&mut layout, "actor");
        let log_std_range = match head {
            PolicyHead::DiagonalGaussian { action_dim } => Some(layout.push("actor.log_std", vec![action_dim])),
            PolicyHead::Categorical { .. } => None,
        };
        let critic_range = critic.push_segments(&mut layout, "critic");
        Ok(ActorCritic {
            head,
            actor,
            critic,
            layout: Arc::new(layout),
            actor_range,
            log_std_range,
            critic_range,
        })
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    /// θ^π: actor weights plus the log-std segment when present.
    pub fn policy_range(&self) -> Range<usize> {
        let end = self.log_std_range.as_ref().map_or(self.actor_range.end, |r| r.end);
        self.actor_range.start..end
    }

    /// θ^V.
    pub fn critic_range(&self) -> Range<usize> {
        self.critic_range.clone()
    }

    /// Orthogonal init: gain 1.0 on hidden layers, 0.01 on the policy output,
    /// 1.0 on the value output; log-std starts at zero.
    pub fn init_params(&self, rng: &mut Stream) -> ParamVector {
        let mut theta = ParamVector::zeros(self.layout.clone());
        let data = theta.as_mut_slice();
        let mut actor_rng = rng.split_named("actor");
        let mut critic_rng = rng.split_named("critic");
        self.actor
            .init_orthogonal(&mut data[self.actor_range.clone()], &mut actor_rng, 1.0, 0.01);
        self.critic
            .init_orthogonal(&mut data[self.critic_range.clone()], &mut critic_rng, 1.0, 1.0);
        theta
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.layout.len() {
            return Err(Error::Dimension {
                context: "theta",
                expected: self.layout.len(),
                got: theta.len(),
            });
        }
        Ok(())
    }

    pub fn policy(&self, theta: &[f64], obs: &[f64]) -> Result<PolicyEval> {
        self.check_theta(theta)?;
        let (mut out, tape) = self.actor.forward(&theta[self.actor_range.clone()], obs)?;
        if let Some(r) = &self.log_std_range {
            out.extend_from_slice(&theta[r.clone()]);
        }
        Ok(PolicyEval {
            dist_params: out,
            tape,
        })
    }

    pub fn value(&self, theta: &[f64], obs: &[f64]) -> Result<f64> {
        self.check_theta(theta)?;
        let (out, _) = self.critic.forward(&theta[self.critic_range.clone()], obs)?;
        Ok(out[0])
    }

    pub fn value_with_tape(&self, theta: &[f64], obs: &[f64]) -> Result<(f64, Tape)> {
        self.check_theta(theta)?;
        let (out, tape) = self.critic.forward(&theta[self.critic_range.clone()], obs)?;
        Ok((out[0], tape))
    }

    /// Samples an action; returns `(action, log_prob, value)`.
    pub fn act(&self, theta: &[f64], obs: &[f64], rng: &mut Stream) -> Result<(Vec<f64>, f64, f64)> {
        let pe = self.policy(theta, obs)?;
        let action = self.head.sample(&pe.dist_params, rng)?;
        let lp = self.head.log_prob_and_entropy(&pe.dist_params, &action)?.log_prob;
        let v = self.value(theta, obs)?;
        if !lp.is_finite() || !v.is_finite() {
            return Err(Error::NonFinite("policy output"));
        }
        Ok((action, lp, v))
    }

    pub fn log_prob(&self, theta: &[f64], obs: &[f64], action: &[f64]) -> Result<(HeadEval, PolicyEval)> {
        let pe = self.policy(theta, obs)?;
        let he = self.head.log_prob_and_entropy(&pe.dist_params, action)?;
        Ok((he, pe))
    }

    /// Accumulates `coef * d log π(a|s) / d θ^π` into `grad_policy`, which is
    /// indexed relative to [`Self::policy_range`].
    pub fn accumulate_log_prob_grad(
        &self,
        theta: &[f64],
        pe: &PolicyEval,
        he: &HeadEval,
        coef: f64,
        grad_policy: &mut [f64],
    ) -> Result<()> {
        if coef == 0.0 {
            return Ok(());
        }
        let net_out = self.head.net_output_dim();
        let out_grad: Vec<f64> = he.dlog_prob[..net_out].iter().map(|d| coef * d).collect();
        let actor_len = self.actor_range.len();
        self.actor.backward(
            &theta[self.actor_range.clone()],
            &pe.tape,
            &out_grad,
            &mut grad_policy[..actor_len],
        )?;
        if self.log_std_range.is_some() {
            for (g, d) in grad_policy[actor_len..].iter_mut().zip(&he.dlog_prob[net_out..]) {
                *g += coef * d;
            }
        }
        Ok(())
    }

    /// Accumulates `coef * dV(s)/dθ^V` into `grad_critic` (relative to the critic range).
    pub fn accumulate_value_grad(&self, theta: &[f64], tape: &Tape, coef: f64, grad_critic: &mut [f64]) -> Result<()> {
        if coef == 0.0 {
            return Ok(());
        }
        self.critic
            .backward(&theta[self.critic_range.clone()], tape, &[coef], grad_critic)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_orders_actor_then_critic() {
        let net = NetworkConfig {
            hidden: vec![4],
            activation: Activation::Tanh,
        };
        let m = ActorCritic::new(3, PolicyHead::DiagonalGaussian { action_dim: 2 }, &net).unwrap();
        let actor_len = (3 * 4 + 4) + (4 * 2 + 2);
        assert_eq!(m.policy_range(), 0..actor_len + 2);
        assert_eq!(m.critic_range(), actor_len + 2..actor_len + 2 + (3 * 4 + 4) + (4 + 1));
        assert_eq!(m.layout().len(), m.critic_range().end);
        assert!(m.layout().segment("actor.log_std").is_some());
    }

    #[test]
    fn init_is_deterministic_and_small_policy_output() {
        let m = ActorCritic::new(4, PolicyHead::Categorical { n: 2 }, &NetworkConfig::default()).unwrap();
        let a = m.init_params(&mut Stream::new(7));
        let b = m.init_params(&mut Stream::new(7));
        assert!(a.bit_eq(&b));
        let pe = m.policy(a.as_slice(), &[0.1, -0.2, 0.3, 0.0]).unwrap();
        assert!(pe.dist_params.iter().all(|z| z.abs() < 0.1));
    }
}
