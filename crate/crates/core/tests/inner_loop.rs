use outer_ppo::adam::{AdamState, Anneal};
use outer_ppo::env::Env;
use outer_ppo::gae::{compute_gae, normalize_advantages, AdvantageEstimate};
use outer_ppo::inner::{inner_optimization_loop, PpoConfig};
use outer_ppo::loss::{clipped_policy_loss, clipped_value_loss, nonzero_gradient_indicator};
use outer_ppo::model::{ActorCritic, NetworkConfig};
use outer_ppo::params::ParamVector;
use outer_ppo::rng::Stream;
use outer_ppo::rollout::{collect_rollout, TransitionBatch, VecEnv};

struct Fixture {
    model: ActorCritic,
    theta: ParamVector,
    batch: TransitionBatch,
    adv: AdvantageEstimate,
}

fn fixture(env_id: &str, seed: u64, n_envs: usize, t_len: usize) -> Fixture {
    let env = Env::make(env_id).unwrap();
    let net = NetworkConfig {
        hidden: vec![8, 8],
        ..NetworkConfig::default()
    };
    let model = ActorCritic::for_env(&env, &net).unwrap();
    let root = Stream::new(seed);
    let theta = model.init_params(&mut root.split(0));
    let mut envs = VecEnv::from_root(env, &root.split(1), n_envs);
    let batch = collect_rollout(&model, &theta, &mut envs, t_len, 1.0).unwrap();
    let adv = compute_gae(&batch, 0.99, 0.95).unwrap();
    Fixture { model, theta, batch, adv }
}

fn cfg(n_envs: usize, t_len: usize, epochs: usize, minibatches: usize) -> PpoConfig {
    PpoConfig {
        num_envs: n_envs,
        rollout_len: t_len,
        num_epochs: epochs,
        num_minibatches: minibatches,
        actor_lr: 1e-3,
        critic_lr: 1e-3,
        anneal_lr: false,
        ..PpoConfig::default()
    }
}

#[test]
fn zero_epochs_rejected() {
    let f = fixture("chain-mdp", 0, 2, 4);
    let c = cfg(2, 4, 0, 1);
    assert!(c.validate().is_err());
    let mut opt = c.make_optimizers(&f.model, 1);
    let r = inner_optimization_loop(&f.model, &f.theta, &f.batch, &f.adv, &c, &mut opt, &mut Stream::new(0));
    assert!(r.is_err());
}

#[test]
fn zero_advantage_and_exact_targets_leave_theta_unchanged() {
    let f = fixture("cartpole-discrete", 1, 4, 8);
    let adv = AdvantageEstimate {
        advantages: vec![0.0; f.batch.len()],
        value_targets: f.batch.values.clone(),
        gamma: 0.99,
        lambda: 0.95,
    };
    let c = cfg(4, 8, 3, 2);
    let mut opt = c.make_optimizers(&f.model, 1);
    let (out, _) = inner_optimization_loop(&f.model, &f.theta, &f.batch, &adv, &c, &mut opt, &mut Stream::new(5)).unwrap();
    assert!(out.bit_eq(&f.theta));
}

#[test]
fn single_epoch_single_minibatch_is_one_adam_step() {
    let f = fixture("cartpole-discrete", 2, 4, 8);
    let c = PpoConfig {
        max_grad_norm: 0.05,
        ..cfg(4, 8, 1, 1)
    };
    let mut opt = c.make_optimizers(&f.model, 1);
    let mut rng = Stream::new(9);
    let (out, diag) = inner_optimization_loop(&f.model, &f.theta, &f.batch, &f.adv, &c, &mut opt, &mut rng.clone()).unwrap();
    assert_eq!(diag.updates, 1);

    // Hand-composed: one permutation, per-batch normalization, losses,
    // global-norm clipping, then a first bias-corrected Adam step.
    let idx = rng.permutation(f.batch.len());
    let raw: Vec<f64> = idx.iter().map(|&i| f.adv.advantages[i]).collect();
    let a = normalize_advantages(&raw);
    let targets: Vec<f64> = idx.iter().map(|&i| f.adv.value_targets[i]).collect();
    let prev: Vec<f64> = idx.iter().map(|&i| f.batch.values[i]).collect();
    let th = f.theta.as_slice();
    let pl = clipped_policy_loss(&f.model, th, &f.batch, &idx, &a, c.clip_eps).unwrap();
    let vl = clipped_value_loss(&f.model, th, &f.batch, &idx, &targets, &prev, c.clip_eps).unwrap();
    let mut expected = th.to_vec();
    for (range, grad, lr) in [
        (f.model.policy_range(), &pl.grad, c.actor_lr),
        (f.model.critic_range(), &vl.grad, c.critic_lr),
    ] {
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let scale = if norm > c.max_grad_norm { c.max_grad_norm / norm } else { 1.0 };
        for (j, g) in grad.iter().enumerate() {
            let g = g * scale;
            let m = 0.1 * g / 0.1;
            let v = 0.001 * g * g / 0.001;
            expected[range.start + j] -= lr * m / (v.sqrt() + AdamState::DEFAULT_EPS);
        }
    }
    for (x, y) in out.as_slice().iter().zip(&expected) {
        assert!((x - y).abs() < 1e-12, "{x} vs {y}");
    }
}

#[test]
fn deterministic_given_rng() {
    let f = fixture("pendulum-continuous", 3, 4, 16);
    let c = cfg(4, 16, 3, 4);
    let run = || {
        let mut opt = c.make_optimizers(&f.model, 1);
        inner_optimization_loop(&f.model, &f.theta, &f.batch, &f.adv, &c, &mut opt, &mut Stream::new(11))
            .unwrap()
            .0
    };
    assert!(run().bit_eq(&run()));
}

#[test]
fn every_sample_used_once_per_epoch() {
    let n = 64;
    for m in [1, 2, 4, 8, 64] {
        let perm = Stream::new(m as u64).permutation(n);
        let mut seen = vec![0; n];
        for chunk in perm.chunks(n / m) {
            assert_eq!(chunk.len(), n / m);
            chunk.iter().for_each(|&i| seen[i] += 1);
        }
        assert!(seen.iter().all(|&c| c == 1));
    }
}

#[test]
fn inner_adam_state_persists_across_calls() {
    let f = fixture("chain-mdp", 4, 2, 8);
    let c = cfg(2, 8, 2, 2);
    let mut opt = c.make_optimizers(&f.model, 3);
    let mut rng = Stream::new(0);
    inner_optimization_loop(&f.model, &f.theta, &f.batch, &f.adv, &c, &mut opt, &mut rng).unwrap();
    assert_eq!(opt.actor.step_count, 4);
    inner_optimization_loop(&f.model, &f.theta, &f.batch, &f.adv, &c, &mut opt, &mut rng).unwrap();
    assert_eq!(opt.critic.step_count, 8);
}

#[test]
fn linear_anneal_reaches_zero_on_last_update() {
    let c = PpoConfig {
        anneal_lr: true,
        ..cfg(2, 8, 2, 2)
    };
    let f = fixture("chain-mdp", 4, 2, 8);
    let opt = c.make_optimizers(&f.model, 5);
    assert_eq!(opt.actor.anneal, Anneal::LinearToZero { total_updates: 20 });
    assert_eq!(opt.actor.lr_at(0), c.actor_lr);
    assert!((opt.actor.lr_at(19) - c.actor_lr / 20.0).abs() < 1e-18);
    assert_eq!(opt.actor.lr_at(20), 0.0);
}

#[test]
fn loss_decreases_on_fixed_batch() {
    let f = fixture("cartpole-discrete", 5, 8, 16);
    let c = PpoConfig {
        clip_eps: 0.5,
        ..cfg(8, 16, 1, 1)
    };
    let idx: Vec<usize> = (0..f.batch.len()).collect();
    let a = normalize_advantages(&f.adv.advantages);
    let prev = f.batch.values.clone();
    let loss = |theta: &ParamVector| {
        let th = theta.as_slice();
        (
            clipped_policy_loss(&f.model, th, &f.batch, &idx, &a, c.clip_eps).unwrap().loss,
            clipped_value_loss(&f.model, th, &f.batch, &idx, &f.adv.value_targets, &prev, 1e9)
                .unwrap()
                .loss,
        )
    };
    let mut opt = c.make_optimizers(&f.model, 1);
    let mut theta = f.theta.clone();
    let (p0, v0) = loss(&theta);
    let mut rng = Stream::new(0);
    for _ in 0..5 {
        theta = inner_optimization_loop(&f.model, &theta, &f.batch, &f.adv, &c, &mut opt, &mut rng).unwrap().0;
    }
    let (p1, v1) = loss(&theta);
    assert!(p1 < p0, "policy loss {p0} -> {p1}");
    assert!(v1 < v0, "value loss {v0} -> {v1}");
}

fn perturbed(f: &Fixture, scale: f64, rng: &mut Stream) -> Vec<f64> {
    f.theta.as_slice().iter().map(|x| x + scale * rng.normal()).collect()
}

#[test]
fn policy_gradient_matches_finite_differences() {
    let mut checked = 0;
    for inst in 0..40u64 {
        let env = ["cartpole-discrete", "pendulum-continuous", "maze-grid", "chain-mdp"][inst as usize % 4];
        let f = fixture(env, 100 + inst, 2, 8);
        let mut rng = Stream::new(inst);
        let theta = perturbed(&f, 0.05, &mut rng);
        let idx: Vec<usize> = (0..f.batch.len()).collect();
        let adv: Vec<f64> = idx.iter().map(|_| rng.normal()).collect();
        let eps = 0.2;
        let l = |th: &[f64]| clipped_policy_loss(&f.model, th, &f.batch, &idx, &adv, eps).unwrap();
        let base = l(&theta);
        let pr = f.model.policy_range();
        let h = 1e-5;
        for j in 0..pr.len() {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[pr.start + j] += h;
            tm[pr.start + j] -= h;
            let fd = (l(&tp).loss - l(&tm).loss) / (2.0 * h);
            let an = base.grad[j];
            let denom = fd.abs().max(an.abs()).max(1e-6);
            assert!((fd - an).abs() / denom < 1e-4, "{env} instance {inst} coord {j}: fd {fd} analytic {an}");
            checked += 1;
        }
    }
    assert!(checked > 1000);
}

#[test]
fn value_gradient_matches_finite_differences() {
    for inst in 0..40u64 {
        let env = ["cartpole-discrete", "pendulum-continuous", "maze-grid", "chain-mdp"][inst as usize % 4];
        let f = fixture(env, 200 + inst, 2, 8);
        let mut rng = Stream::new(inst);
        let theta = perturbed(&f, 0.05, &mut rng);
        let idx: Vec<usize> = (0..f.batch.len()).collect();
        let targets: Vec<f64> = idx.iter().map(|_| rng.normal()).collect();
        let prev: Vec<f64> = idx.iter().map(|_| 0.3 * rng.normal()).collect();
        let l = |th: &[f64]| clipped_value_loss(&f.model, th, &f.batch, &idx, &targets, &prev, 0.2).unwrap();
        // Skip instances with a sample sitting on a kink of the clipped term.
        let near_kink = idx.iter().any(|&i| {
            let v = f.model.value(&theta, f.batch.obs_at(i)).unwrap();
            let d = v - prev[i];
            let vc = prev[i] + d.clamp(-0.2, 0.2);
            (d.abs() - 0.2).abs() < 1e-5 || (d.abs() > 0.2 && ((v - targets[i]).powi(2) - (vc - targets[i]).powi(2)).abs() < 1e-5)
        });
        if near_kink {
            continue;
        }
        let base = l(&theta);
        let cr = f.model.critic_range();
        let h = 1e-5;
        for j in 0..cr.len() {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[cr.start + j] += h;
            tm[cr.start + j] -= h;
            let fd = (l(&tp).loss - l(&tm).loss) / (2.0 * h);
            let an = base.grad[j];
            let denom = fd.abs().max(an.abs()).max(1e-6);
            assert!((fd - an).abs() / denom < 1e-4, "{env} instance {inst} coord {j}: fd {fd} analytic {an}");
        }
    }
}

#[test]
fn per_sample_gradient_nonzero_iff_indicator() {
    let f = fixture("cartpole-discrete", 7, 4, 16);
    let mut rng = Stream::new(1);
    let mut both = [0usize; 2];
    for _ in 0..5 {
        let theta = perturbed(&f, 0.3, &mut rng);
        for i in 0..f.batch.len() {
            let adv = rng.normal();
            let eps = 0.1;
            let pl = clipped_policy_loss(&f.model, &theta, &f.batch, &[i], &[adv], eps).unwrap();
            let (he, _) = f.model.log_prob(&theta, f.batch.obs_at(i), f.batch.action_at(i)).unwrap();
            let ratio = (he.log_prob - f.batch.behavior_log_probs[i]).exp();
            let nonzero = pl.grad.iter().any(|g| g.abs() > 1e-12);
            let ind = nonzero_gradient_indicator(ratio, adv, eps);
            assert_eq!(nonzero, ind, "ratio {ratio} adv {adv}");
            both[ind as usize] += 1;
        }
    }
    assert!(both[0] > 0 && both[1] > 0, "{both:?}");
}
