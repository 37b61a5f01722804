//! Adam with optional linear learning-rate annealing and global-norm
//! gradient clipping. Operates on a contiguous parameter slice so actor and
//! critic each own an independent instance over their part of θ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::l2_norm;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Anneal {
    None,
    LinearToZero { total_updates: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    /// Updates applied so far; drives the annealing schedule.
    pub step_count: u64,
    /// Updates since the moments were last reset; drives bias correction.
    pub moment_steps: u64,
    pub base_lr: f64,
    pub anneal: Anneal,
    pub eps: f64,
    pub beta1: f64,
    pub beta2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamStepInfo {
    /// Global norm before clipping.
    pub grad_norm: f64,
    pub lr: f64,
    pub clipped: bool,
}

impl AdamState {
    pub const DEFAULT_EPS: f64 = 1e-5;

    pub fn new(len: usize, base_lr: f64, anneal: Anneal) -> Self {
        AdamState {
            m1: vec![0.0; len],
            m2: vec![0.0; len],
            step_count: 0,
            moment_steps: 0,
            base_lr,
            anneal,
            eps: Self::DEFAULT_EPS,
            beta1: 0.9,
            beta2: 0.999,
        }
    }

    pub fn len(&self) -> usize {
        self.m1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m1.is_empty()
    }

    /// Learning rate applied at update number `step` (0-based).
    pub fn lr_at(&self, step: u64) -> f64 {
        match self.anneal {
            Anneal::None => self.base_lr,
            Anneal::LinearToZero { total_updates } => {
                if total_updates == 0 {
                    return 0.0;
                }
                let frac = 1.0 - step as f64 / total_updates as f64;
                self.base_lr * frac.max(0.0)
            }
        }
    }

    pub fn current_lr(&self) -> f64 {
        self.lr_at(self.step_count)
    }

    /// Descends on `grad`. The gradient is rescaled so its global norm is at
    /// most `max_grad_norm` before the moment updates.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], max_grad_norm: f64) -> Result<AdamStepInfo> {
        if params.len() != self.len() || grad.len() != self.len() {
            return Err(Error::Dimension {
                context: "adam step",
                expected: self.len(),
                got: params.len().min(grad.len()),
            });
        }
        if max_grad_norm.is_nan() || max_grad_norm <= 0.0 {
            return Err(Error::Config(format!("max_grad_norm must be > 0, got {max_grad_norm}")));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        let grad_norm = l2_norm(grad);
        let clipped = grad_norm > max_grad_norm;
        let scale = if clipped { max_grad_norm / grad_norm } else { 1.0 };
        let lr = self.current_lr();
        self.step_count += 1;
        self.moment_steps += 1;
        let t = self.moment_steps.min(i32::MAX as u64) as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grad[i] * scale;
            self.m1[i] = self.beta1 * self.m1[i] + (1.0 - self.beta1) * g;
            self.m2[i] = self.beta2 * self.m2[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m1[i] / bc1;
            let vhat = self.m2[i] / bc2;
            params[i] -= lr * mhat / (vhat.sqrt() + self.eps);
        }
        Ok(AdamStepInfo { grad_norm, lr, clipped })
    }

    /// Zeroes the moment estimates. The annealing position is kept.
    pub fn reset_moments(&mut self) {
        self.m1.iter_mut().for_each(|v| *v = 0.0);
        self.m2.iter_mut().for_each(|v| *v = 0.0);
        self.moment_steps = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grad_keeps_params() {
        let mut a = AdamState::new(3, 1e-3, Anneal::None);
        let mut p = vec![1.0, -2.0, 3.0];
        a.step(&mut p, &[0.0; 3], 1.0).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(a.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut a = AdamState::new(3, 1e-2, Anneal::None);
        let mut p = vec![0.0; 3];
        a.step(&mut p, &[0.3, -0.2, 0.1], 10.0).unwrap();
        for (pi, gi) in p.iter().zip([0.3, -0.2, 0.1]) {
            assert!((pi.abs() - 1e-2).abs() < 1e-3 * 1e-2 * 100.0);
            assert_eq!(pi.signum(), -f64::signum(gi));
        }
    }

    #[test]
    fn clipping_scales_gradient() {
        // After clipping, the moments must hold exactly the scaled gradient.
        let mut a = AdamState::new(2, 1e-3, Anneal::None);
        let mut p = vec![0.0; 2];
        let info = a.step(&mut p, &[6.0, 8.0], 1.0).unwrap();
        assert!(info.clipped);
        assert_eq!(info.grad_norm, 10.0);
        assert!((a.m1[0] - 0.1 * 0.6).abs() < 1e-15);
        assert!((a.m1[1] - 0.1 * 0.8).abs() < 1e-15);
    }

    #[test]
    fn linear_anneal_reaches_zero() {
        let a = AdamState::new(1, 0.5, Anneal::LinearToZero { total_updates: 10 });
        assert_eq!(a.lr_at(0), 0.5);
        assert!((a.lr_at(5) - 0.25).abs() < 1e-15);
        assert_eq!(a.lr_at(10), 0.0);
        assert_eq!(a.lr_at(12), 0.0);
    }

    #[test]
    fn non_finite_grad_rejected_without_mutation() {
        let mut a = AdamState::new(2, 1e-3, Anneal::None);
        let mut p = vec![1.0, 1.0];
        assert!(a.step(&mut p, &[f64::NAN, 0.0], 1.0).is_err());
        assert_eq!(a.step_count, 0);
        assert_eq!(p, vec![1.0, 1.0]);
    }

    #[test]
    fn deterministic_trajectory() {
        let run = || {
            let mut a = AdamState::new(2, 1e-2, Anneal::LinearToZero { total_updates: 50 });
            let mut p = vec![0.3, -0.7];
            for k in 0..50 {
                let g = [p[0] * 2.0 + k as f64 * 0.01, p[1] - 0.5];
                a.step(&mut p, &g, 0.5).unwrap();
            }
            p
        };
        let (x, y) = (run(), run());
        assert_eq!(x[0].to_bits(), y[0].to_bits());
        assert_eq!(x[1].to_bits(), y[1].to_bits());
    }
}
