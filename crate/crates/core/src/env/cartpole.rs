//! Cart-pole balancing with the classic Barto-Sutton-Anderson constants and
//! explicit Euler integration. Reward 1 per step including the failing one.

use super::{ActionSpace, EnvSpec};
use crate::rng::Stream;

const GRAVITY: f64 = 9.8;
const MASS_CART: f64 = 1.0;
const MASS_POLE: f64 = 0.1;
const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
const HALF_LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = MASS_POLE * HALF_LENGTH;
const FORCE_MAG: f64 = 10.0;
const TAU: f64 = 0.02;
const THETA_LIMIT: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
const X_LIMIT: f64 = 2.4;
const MAX_STEPS: u32 = 200;

pub(super) fn spec() -> EnvSpec {
    EnvSpec {
        id: "cartpole-discrete".into(),
        obs_dim: 4,
        action_space: ActionSpace::Discrete { n: 2 },
        max_episode_steps: MAX_STEPS,
        reward_range_hint: (0.0, MAX_STEPS as f64),
    }
}

/// `[x, x_dot, theta, theta_dot]`, each uniform in ±0.05.
pub(super) fn reset(rng: &mut Stream) -> Vec<f64> {
    (0..4).map(|_| rng.uniform_range(-0.05, 0.05)).collect()
}

pub(super) fn step_with_force(s: &mut [f64], force: f64) -> bool {
    let (x, x_dot, theta, theta_dot) = (s[0], s[1], s[2], s[3]);
    let (sin, cos) = theta.sin_cos();
    let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin) / TOTAL_MASS;
    let theta_acc = (GRAVITY * sin - cos * temp)
        / (HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos * cos / TOTAL_MASS));
    let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS;
    s[0] = x + TAU * x_dot;
    s[1] = x_dot + TAU * x_acc;
    s[2] = theta + TAU * theta_dot;
    s[3] = theta_dot + TAU * theta_acc;
    s[0].abs() > X_LIMIT || s[2].abs() > THETA_LIMIT
}

pub(super) fn step(s: &mut [f64], action: usize) -> (f64, bool) {
    let force = if action == 1 { FORCE_MAG } else { -FORCE_MAG };
    let terminated = step_with_force(s, force);
    (1.0, terminated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Env;

    #[test]
    fn upright_with_zero_force_stays_up() {
        let mut s = vec![0.0; 4];
        let failed = step_with_force(&mut s, 0.0);
        assert!(!failed);
        assert!(s[2].abs() < THETA_LIMIT);
        assert_eq!(s, vec![0.0; 4]);
    }

    #[test]
    fn same_seed_same_obs() {
        let e = Env::make("cartpole-discrete").unwrap();
        assert_eq!(e.reset(17).1, e.reset(17).1);
        assert_ne!(e.reset(17).1, e.reset(18).1);
    }

    #[test]
    fn constant_push_falls_over() {
        let e = Env::make("cartpole-discrete").unwrap();
        let (mut s, _) = e.reset(0);
        let mut steps = 0;
        loop {
            let st = e.step(&s, &[1.0]).unwrap();
            steps += 1;
            if st.done() {
                assert!(st.terminated);
                break;
            }
            s = st.state;
        }
        assert!(steps < 50);
    }
}
