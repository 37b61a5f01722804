//! Torque-limited pendulum swing-up. Never terminates; truncates at the
//! step limit. Cost is `angle^2 + 0.1 * omega^2 + 0.001 * u^2` with the
//! angle wrapped into `[-pi, pi)`.

use std::f64::consts::PI;

use super::{ActionSpace, EnvSpec};
use crate::rng::Stream;

const MAX_SPEED: f64 = 8.0;
const MAX_TORQUE: f64 = 2.0;
const DT: f64 = 0.05;
const G: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;
const MAX_STEPS: u32 = 200;

pub(super) fn spec() -> EnvSpec {
    EnvSpec {
        id: "pendulum-continuous".into(),
        obs_dim: 3,
        action_space: ActionSpace::Box {
            dim: 1,
            low: -MAX_TORQUE,
            high: MAX_TORQUE,
        },
        max_episode_steps: MAX_STEPS,
        reward_range_hint: (-16.2736044 * MAX_STEPS as f64, 0.0),
    }
}

pub(super) fn reset(rng: &mut Stream) -> Vec<f64> {
    let theta = rng.uniform_range(-PI, PI);
    let omega = rng.uniform_range(-1.0, 1.0);
    vec![theta, omega]
}

pub(super) fn observe(s: &[f64]) -> Vec<f64> {
    vec![s[0].cos(), s[0].sin(), s[1]]
}

fn wrap_angle(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// `torque` must already be clamped.
pub(super) fn step(s: &mut [f64], torque: f64) -> (f64, bool) {
    let (theta, omega) = (s[0], s[1]);
    let cost = wrap_angle(theta).powi(2) + 0.1 * omega * omega + 0.001 * torque * torque;
    let new_omega = (omega + (3.0 * G / (2.0 * LENGTH) * theta.sin() + 3.0 / (MASS * LENGTH * LENGTH) * torque) * DT)
        .clamp(-MAX_SPEED, MAX_SPEED);
    s[0] = theta + new_omega * DT;
    s[1] = new_omega;
    (-cost, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upright_at_rest_costs_nothing() {
        let mut s = vec![0.0, 0.0];
        let (r, term) = step(&mut s, 0.0);
        assert_eq!(r, 0.0);
        assert!(!term);
        assert_eq!(s, vec![0.0, 0.0]);
    }

    #[test]
    fn wrap() {
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_angle(-PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }
}
