//! Deterministic chain: start at state 0, `0` moves left (floored at 0),
//! `1` moves right. Entering the last state pays 1 and terminates.

use super::{ActionSpace, EnvSpec};

pub const CHAIN_LENGTH: usize = 5;
const MAX_STEPS: u32 = 10;

pub(super) fn spec() -> EnvSpec {
    EnvSpec {
        id: "chain-mdp".into(),
        obs_dim: CHAIN_LENGTH,
        action_space: ActionSpace::Discrete { n: 2 },
        max_episode_steps: MAX_STEPS,
        reward_range_hint: (0.0, 1.0),
    }
}

pub(super) fn reset() -> Vec<f64> {
    vec![0.0]
}

pub(super) fn observe(internal: &[f64]) -> Vec<f64> {
    let mut obs = vec![0.0; CHAIN_LENGTH];
    obs[internal[0] as usize] = 1.0;
    obs
}

fn transition(pos: usize, action: usize, n: usize) -> (usize, f64, bool) {
    let next = if action == 1 { (pos + 1).min(n - 1) } else { pos.saturating_sub(1) };
    if next == n - 1 {
        (next, 1.0, true)
    } else {
        (next, 0.0, false)
    }
}

pub(super) fn step(internal: &mut [f64], action: usize) -> (f64, bool) {
    let (next, r, done) = transition(internal[0] as usize, action, CHAIN_LENGTH);
    internal[0] = next as f64;
    (r, done)
}

/// Finite-horizon value iteration from the start state: the optimal
/// expected return within `horizon` steps for a chain of length `n`.
pub fn chain_value_iteration(n: usize, horizon: u32, gamma: f64) -> f64 {
    // v[s] = optimal return with h steps remaining.
    let mut v = vec![0.0; n];
    for _ in 0..horizon {
        let mut next_v = vec![0.0; n];
        for (s, slot) in next_v.iter_mut().enumerate().take(n - 1) {
            *slot = (0..2)
                .map(|a| {
                    let (s2, r, done) = transition(s, a, n);
                    r + if done { 0.0 } else { gamma * v[s2] }
                })
                .fold(f64::NEG_INFINITY, f64::max);
        }
        v = next_v;
    }
    v[0]
}

#[cfg(test)]
mod tests {
    use crate::env::Env;

    use super::*;

    #[test]
    fn always_right_collects_reward_on_step_four() {
        let e = Env::make("chain-mdp").unwrap();
        for seed in [0, 1, 12345] {
            let (mut s, obs) = e.reset(seed);
            assert_eq!(obs, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
            let mut ret = 0.0;
            for t in 1..=4 {
                let st = e.step(&s, &[1.0]).unwrap();
                ret += st.reward;
                if t < 4 {
                    assert_eq!(st.reward, 0.0);
                    assert!(!st.terminated);
                } else {
                    assert_eq!(st.reward, 1.0);
                    assert!(st.terminated);
                }
                s = st.state;
            }
            assert_eq!(ret, 1.0);
        }
    }

    #[test]
    fn always_left_truncates() {
        let e = Env::make("chain-mdp").unwrap();
        let (mut s, _) = e.reset(0);
        for t in 1..=MAX_STEPS {
            let st = e.step(&s, &[0.0]).unwrap();
            assert_eq!(st.truncated, t == MAX_STEPS);
            s = st.state;
        }
    }

    #[test]
    fn value_iteration() {
        assert_eq!(chain_value_iteration(5, 10, 1.0), 1.0);
        assert_eq!(chain_value_iteration(5, 3, 1.0), 0.0);
        assert!((chain_value_iteration(5, 10, 0.9) - 0.9f64.powi(3)).abs() < 1e-15);
    }
}
