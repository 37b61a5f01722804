use std::fs;

use anyhow::Context;
use outer_ppo::checkpoint::{policy_from_bytes, trainer_from_bytes};
use outer_ppo::driver::{evaluate_policy, Trainer};
use outer_ppo::env::Env;
use outer_ppo::metrics::mean;
use serde::Serialize;

use crate::args::EvalArgs;
use crate::train::resolve_config;
use crate::{config_error, write_atomic, EXIT_OK};

#[derive(Debug, Serialize)]
struct EvalReport {
    env: String,
    episodes: u64,
    eval_seed: u64,
    mean_return: f64,
    returns: Vec<f64>,
}

pub fn run(args: &EvalArgs) -> anyhow::Result<i32> {
    let cfg = resolve_config(&args.source)?;
    // Only used for the model, environment and default seed.
    let trainer = Trainer::new(cfg.clone()).map_err(config_error)?;
    let bytes = fs::read(&args.checkpoint).with_context(|| format!("reading {}", args.checkpoint.display()))?;
    let theta = match policy_from_bytes(&bytes) {
        Ok(t) => t,
        Err(_) => trainer_from_bytes(&bytes)
            .with_context(|| format!("{} is neither a policy nor a trainer checkpoint", args.checkpoint.display()))?
            .theta()
            .clone(),
    };
    let seed = args.eval_seed.unwrap_or_else(|| trainer.absolute_eval_seed());
    let env = Env::make(&cfg.env)?;
    let returns = evaluate_policy(trainer.model(), &env, &theta, args.episodes, seed)?;
    let report = EvalReport {
        env: cfg.env.clone(),
        episodes: args.episodes,
        eval_seed: seed,
        mean_return: mean(&returns),
        returns,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    match &args.out {
        Some(p) => write_atomic(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(EXIT_OK)
}
