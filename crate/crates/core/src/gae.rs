//! Generalized advantage estimation over time-major batches.
//!
//! `δ_t = r_t + γ (1 - terminated_t) V_next - V_t`, where `V_next` is the
//! stored value of the final observation on truncation, the bootstrap value
//! at the batch edge, and `V_{t+1}` otherwise. The recursion
//! `A_t = δ_t + γ λ (1 - done_t) A_{t+1}` is cut at every episode end.

use crate::error::{Error, Result};
use crate::rollout::TransitionBatch;

#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageEstimate {
    pub advantages: Vec<f64>,
    pub value_targets: Vec<f64>,
    pub gamma: f64,
    pub lambda: f64,
}

/// GAE for one env's column of length `T`.
#[allow(clippy::too_many_arguments)]
pub fn gae_column(
    rewards: &[f64],
    values: &[f64],
    terminated: &[bool],
    truncated: &[bool],
    truncation_values: &[f64],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let t_len = rewards.len();
    let mut adv = vec![0.0; t_len];
    let mut next_adv = 0.0;
    for t in (0..t_len).rev() {
        let next_value = if truncated[t] {
            truncation_values[t]
        } else if t + 1 == t_len {
            bootstrap
        } else {
            values[t + 1]
        };
        let not_terminal = if terminated[t] { 0.0 } else { 1.0 };
        let not_done = if terminated[t] || truncated[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * not_terminal * next_value - values[t];
        next_adv = delta + gamma * lambda * not_done * next_adv;
        adv[t] = next_adv;
    }
    adv
}

pub fn compute_gae(batch: &TransitionBatch, gamma: f64, lambda: f64) -> Result<AdvantageEstimate> {
    if !(0.0..=1.0).contains(&gamma) || !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!(
            "gamma and lambda must lie in [0, 1], got {gamma}, {lambda}"
        )));
    }
    batch.validate()?;
    let (t_len, n) = (batch.t_len, batch.n_envs);
    let mut advantages = vec![0.0; t_len * n];
    for e in 0..n {
        let col = |v: &[f64]| -> Vec<f64> { (0..t_len).map(|t| v[t * n + e]).collect() };
        let colb = |v: &[bool]| -> Vec<bool> { (0..t_len).map(|t| v[t * n + e]).collect() };
        let a = gae_column(
            &col(&batch.rewards),
            &col(&batch.values),
            &colb(&batch.terminated),
            &colb(&batch.truncated),
            &col(&batch.truncation_values),
            batch.bootstrap_values[e],
            gamma,
            lambda,
        );
        for (t, v) in a.into_iter().enumerate() {
            advantages[t * n + e] = v;
        }
    }
    if advantages.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("advantages"));
    }
    let value_targets = advantages.iter().zip(&batch.values).map(|(a, v)| a + v).collect();
    Ok(AdvantageEstimate {
        advantages,
        value_targets,
        gamma,
        lambda,
    })
}

/// Zero mean, unit (population) standard deviation, with a 1e-8 guard.
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    if adv.is_empty() {
        return Vec::new();
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    adv.iter().map(|a| (a - mean) / (std + 1e-8)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    /// Explicit `Σ_l (γλ)^l δ_{t+l}` up to the episode end.
    fn brute_force(
        r: &[f64],
        v: &[f64],
        term: &[bool],
        trunc: &[bool],
        tv: &[f64],
        boot: f64,
        g: f64,
        l: f64,
    ) -> Vec<f64> {
        let n = r.len();
        let delta: Vec<f64> = (0..n)
            .map(|t| {
                let next = if trunc[t] {
                    tv[t]
                } else if t + 1 == n {
                    boot
                } else {
                    v[t + 1]
                };
                r[t] + if term[t] { 0.0 } else { g * next } - v[t]
            })
            .collect();
        (0..n)
            .map(|t| {
                let mut s = 0.0;
                let mut w = 1.0;
                for k in t..n {
                    s += w * delta[k];
                    if term[k] || trunc[k] {
                        break;
                    }
                    w *= g * l;
                }
                s
            })
            .collect()
    }

    fn random_column(rng: &mut Stream, t: usize) -> (Vec<f64>, Vec<f64>, Vec<bool>, Vec<bool>, Vec<f64>, f64) {
        let r = (0..t).map(|_| rng.normal()).collect();
        let v = (0..t).map(|_| rng.normal()).collect();
        let term: Vec<bool> = (0..t).map(|_| rng.uniform() < 0.1).collect();
        let trunc: Vec<bool> = term.iter().map(|&d| !d && rng.uniform() < 0.1).collect();
        let tv = trunc.iter().map(|&d| if d { rng.normal() } else { 0.0 }).collect();
        (r, v, term, trunc, tv, rng.normal())
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = Stream::new(0);
        for _ in 0..300 {
            let t = 1 + rng.below(32) as usize;
            let (r, v, term, trunc, tv, boot) = random_column(&mut rng, t);
            let g = rng.uniform();
            let l = rng.uniform();
            let a = gae_column(&r, &v, &term, &trunc, &tv, boot, g, l);
            let b = brute_force(&r, &v, &term, &trunc, &tv, boot, g, l);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn lambda_zero_is_td_residual() {
        let r = [1.0, 0.5, -0.2];
        let v = [0.3, 0.1, 0.7];
        let no = [false; 3];
        let a = gae_column(&r, &v, &no, &no, &[0.0; 3], 0.4, 0.9, 0.0);
        assert_eq!(a[0], 1.0 + 0.9 * 0.1 - 0.3);
        assert_eq!(a[1], 0.5 + 0.9 * 0.7 - 0.1);
        assert_eq!(a[2], -0.2 + 0.9 * 0.4 - 0.7);
    }

    #[test]
    fn gamma_zero_is_reward_minus_value() {
        let r = [1.0, 0.5, -0.2];
        let v = [0.3, 0.1, 0.7];
        let no = [false; 3];
        let a = gae_column(&r, &v, &no, &no, &[0.0; 3], 0.4, 0.0, 0.95);
        for t in 0..3 {
            assert_eq!(a[t], r[t] - v[t]);
        }
    }

    #[test]
    fn termination_blocks_leakage() {
        // Changing anything after a terminal step must not move earlier advantages.
        let mut rng = Stream::new(4);
        let (r, v, _, _, tv, boot) = random_column(&mut rng, 10);
        let mut term = vec![false; 10];
        term[4] = true;
        let no = vec![false; 10];
        let a = gae_column(&r, &v, &term, &no, &tv, boot, 0.99, 0.95);
        let mut r2 = r.clone();
        let mut v2 = v.clone();
        for t in 5..10 {
            r2[t] += 10.0;
            v2[t] -= 3.0;
        }
        let b = gae_column(&r2, &v2, &term, &no, &tv, boot + 5.0, 0.99, 0.95);
        assert_eq!(&a[..5], &b[..5]);
    }

    #[test]
    fn scales_linearly_with_reward_when_values_are_zero() {
        let mut rng = Stream::new(8);
        let (r, _, term, trunc, _, _) = random_column(&mut rng, 20);
        let zeros = vec![0.0; 20];
        let a = gae_column(&r, &zeros, &term, &trunc, &zeros, 0.0, 0.99, 1.0);
        let r3: Vec<f64> = r.iter().map(|x| 3.0 * x).collect();
        let b = gae_column(&r3, &zeros, &term, &trunc, &zeros, 0.0, 0.99, 1.0);
        for (x, y) in a.iter().zip(&b) {
            assert!((3.0 * x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization() {
        let n = normalize_advantages(&[1.0, 2.0, 3.0]);
        let mean: f64 = n.iter().sum::<f64>() / 3.0;
        let std = (n.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        assert!(mean.abs() < 1e-15);
        assert!((std - 1.0).abs() < 1e-7);
        assert_eq!(normalize_advantages(&[4.0; 5]), vec![0.0; 5]);
        let again = normalize_advantages(&n);
        for (a, b) in n.iter().zip(&again) {
            assert!((a - b).abs() < 1e-7);
        }
    }
}
