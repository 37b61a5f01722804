//! Clipped surrogate objectives for the actor and critic, with exact
//! gradients. Both losses are minimized, so the policy loss is the negated
//! clipped surrogate.

use crate::error::{Error, Result};
use crate::model::ActorCritic;
use crate::rollout::TransitionBatch;

/// True iff the clipped objective passes gradient for this sample:
/// `|ρ - 1| <= ε` or `(ρ - 1) Â <= 0`.
pub fn nonzero_gradient_indicator(ratio: f64, advantage: f64, clip_eps: f64) -> bool {
    (ratio - 1.0).abs() <= clip_eps || (ratio - 1.0) * advantage <= 0.0
}

/// Per-sample `min(ρÂ, clip(ρ)Â)` and its derivative with respect to ρ.
/// Ties go to the unclipped branch.
pub fn surrogate_term(ratio: f64, advantage: f64, clip_eps: f64) -> (f64, f64) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * advantage;
    if unclipped <= clipped {
        (unclipped, advantage)
    } else {
        (clipped, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyLoss {
    pub loss: f64,
    /// Gradient over θ^π (indexed relative to the policy range).
    pub grad: Vec<f64>,
    pub clip_fraction: f64,
    pub mean_ratio: f64,
    /// Fraction of samples inside the non-zero-gradient region.
    pub active_fraction: f64,
    pub entropy: f64,
}

/// `-mean(min(ρÂ, clip(ρ, 1-ε, 1+ε)Â))` over `indices`, with
/// `ρ = exp(log π_θ(a|s) - log π_behavior(a|s))`. `advantages[j]` belongs to
/// sample `indices[j]`.
pub fn clipped_policy_loss(
    model: &ActorCritic,
    theta: &[f64],
    batch: &TransitionBatch,
    indices: &[usize],
    advantages: &[f64],
    clip_eps: f64,
) -> Result<PolicyLoss> {
    if indices.len() != advantages.len() {
        return Err(Error::Dimension {
            context: "policy loss advantages",
            expected: indices.len(),
            got: advantages.len(),
        });
    }
    if indices.is_empty() {
        return Err(Error::Empty("policy minibatch"));
    }
    let inv_b = 1.0 / indices.len() as f64;
    let mut grad = vec![0.0; model.policy_range().len()];
    let (mut objective, mut clipped, mut active, mut ratio_sum, mut entropy) = (0.0, 0, 0, 0.0, 0.0);
    for (&i, &adv) in indices.iter().zip(advantages) {
        let (he, pe) = model.log_prob(theta, batch.obs_at(i), batch.action_at(i))?;
        let ratio = (he.log_prob - batch.behavior_log_probs[i]).exp();
        if !ratio.is_finite() {
            return Err(Error::NonFinite("probability ratio"));
        }
        let (term, dterm_dratio) = surrogate_term(ratio, adv, clip_eps);
        objective += term;
        ratio_sum += ratio;
        entropy += he.entropy;
        if (ratio - 1.0).abs() > clip_eps {
            clipped += 1;
        }
        if nonzero_gradient_indicator(ratio, adv, clip_eps) {
            active += 1;
        }
        // d(-term/B)/d logπ = -(dterm/dρ) ρ / B
        let coef = -dterm_dratio * ratio * inv_b;
        model.accumulate_log_prob_grad(theta, &pe, &he, coef, &mut grad)?;
    }
    let loss = -objective * inv_b;
    if !loss.is_finite() {
        return Err(Error::NonFinite("policy loss"));
    }
    let n = indices.len() as f64;
    Ok(PolicyLoss {
        loss,
        grad,
        clip_fraction: clipped as f64 / n,
        mean_ratio: ratio_sum / n,
        active_fraction: active as f64 / n,
        entropy: entropy / n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueLoss {
    pub loss: f64,
    /// Gradient over θ^V (indexed relative to the critic range).
    pub grad: Vec<f64>,
}

/// Per-sample `max((V - V_targ)^2, (clip(V, V_prev ± ε) - V_targ)^2)` and
/// its derivative with respect to `V`. Ties go to the unclipped term.
pub fn clipped_value_term(value: f64, target: f64, prev: f64, clip_eps: f64) -> (f64, f64) {
    let unclipped = (value - target).powi(2);
    let diff = value - prev;
    let v_clipped = prev + diff.clamp(-clip_eps, clip_eps);
    let clipped = (v_clipped - target).powi(2);
    if unclipped >= clipped {
        (unclipped, 2.0 * (value - target))
    } else {
        // Inside the band `prev + diff` can round away from `value`, so the
        // clipped branch may win there and still passes gradient.
        let inside = diff.abs() <= clip_eps;
        (clipped, if inside { 2.0 * (v_clipped - target) } else { 0.0 })
    }
}

pub fn clipped_value_loss(
    model: &ActorCritic,
    theta: &[f64],
    batch: &TransitionBatch,
    indices: &[usize],
    value_targets: &[f64],
    prev_values: &[f64],
    clip_eps: f64,
) -> Result<ValueLoss> {
    if value_targets.len() != indices.len() || prev_values.len() != indices.len() {
        return Err(Error::Dimension {
            context: "value loss targets",
            expected: indices.len(),
            got: value_targets.len().min(prev_values.len()),
        });
    }
    if indices.is_empty() {
        return Err(Error::Empty("value minibatch"));
    }
    let inv_b = 1.0 / indices.len() as f64;
    let mut grad = vec![0.0; model.critic_range().len()];
    let mut total = 0.0;
    for ((&i, &target), &prev) in indices.iter().zip(value_targets).zip(prev_values) {
        let (v, tape) = model.value_with_tape(theta, batch.obs_at(i))?;
        let (term, dv) = clipped_value_term(v, target, prev, clip_eps);
        total += term;
        model.accumulate_value_grad(theta, &tape, dv * inv_b, &mut grad)?;
    }
    let loss = total * inv_b;
    if !loss.is_finite() {
        return Err(Error::NonFinite("value loss"));
    }
    Ok(ValueLoss { loss, grad })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indicator_cases() {
        let eps = 0.2;
        assert!(nonzero_gradient_indicator(1.0, 3.0, eps));
        assert!(nonzero_gradient_indicator(1.0, -3.0, eps));
        assert!(!nonzero_gradient_indicator(1.0 + 2.0 * eps, 1.0, eps));
        assert!(nonzero_gradient_indicator(1.0 + 2.0 * eps, -1.0, eps));
        assert!(!nonzero_gradient_indicator(1.0 - 2.0 * eps, -1.0, eps));
        assert!(nonzero_gradient_indicator(1.0 - 2.0 * eps, 1.0, eps));
    }

    #[test]
    fn surrogate_clipped_positive_advantage_has_no_gradient() {
        let (term, d) = surrogate_term(1.4, 2.0, 0.2);
        assert!((term - 1.2 * 2.0).abs() < 1e-15);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn value_term_cases() {
        assert_eq!(clipped_value_term(1.0, 1.0, 1.0, 0.2), (0.0, 0.0));
        // V = 5 outside the band around prev = 0; target 4 makes the clipped error larger.
        let (t, d) = clipped_value_term(5.0, 4.0, 0.0, 0.2);
        assert!((t - 3.8f64.powi(2)).abs() < 1e-12);
        assert_eq!(d, 0.0);
        // Target -1 makes the unclipped error larger, so the gradient flows through V.
        let (t, d) = clipped_value_term(5.0, -1.0, 0.0, 0.2);
        assert_eq!(t, 36.0);
        assert_eq!(d, 12.0);
    }
}
