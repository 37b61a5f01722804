use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context};
use outer_ppo::checkpoint::{load_trainer, save_policy, trainer_to_bytes};
use outer_ppo::config::{parse_scalar, set_path, RunConfig};
use outer_ppo::driver::{Event, RunSummary, Trainer};
use outer_ppo::presets::{desk_preset, preset, preset_names, Preset};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::{ConfigSource, OuterKind, TrainArgs};
use crate::{config_error, write_atomic, EXIT_ABORTED, EXIT_OK};

pub const RESOLVED_CONFIG: &str = "resolved-config.json";
pub const EVENTS: &str = "events.jsonl";
pub const OUTER_EVENTS: &str = "outer.jsonl";
pub const SUMMARY: &str = "summary.json";
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";
pub const TRAINER_CHECKPOINT: &str = "trainer.ckpt";
const TRAINER_OFFSETS: &str = "trainer.offsets.json";

fn desk_for_env(env: &str) -> Option<RunConfig> {
    preset_names()
        .iter()
        .filter_map(|n| desk_preset(n))
        .find(|c| c.env == env)
}

/// Builds the run config from a file, preset or environment id, then applies
/// the named flags and finally the `--set` overrides. Nothing here touches
/// the file system beyond reading the config.
pub fn resolve_config(src: &ConfigSource) -> anyhow::Result<RunConfig> {
    let base = if let Some(path) = &src.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        RunConfig::from_json(&text).map_err(config_error)?
    } else if let Some(name) = &src.preset {
        match preset(name).map_err(config_error)? {
            Preset::Run(c) => *c,
            _ => return Err(config_error(format!("preset `{name}` is not a run config"))),
        }
    } else if let Some(env) = &src.env {
        desk_for_env(env).ok_or_else(|| config_error(format!("no default config for environment `{env}`")))?
    } else {
        return Err(config_error("one of --config, --preset or --env is required"));
    };

    let mut v = base.to_value();
    let mut set = |path: &str, value: Value| set_path(&mut v, path, value).map_err(config_error);
    if let Some(env) = &src.env {
        set("env", json!(env))?;
    }
    if let Some(seed) = src.seed {
        set("seed", json!(seed))?;
    }
    if let Some(b) = src.budget {
        set("total_transitions", json!(b))?;
    }
    if let Some(n) = src.envs {
        set("ppo.num_envs", json!(n))?;
    }
    if let Some(l) = &src.label {
        set("label", json!(l))?;
    }
    match src.outer {
        Some(kind) => {
            let sigma = src.sigma.unwrap_or(1.0);
            let mu = src.mu.unwrap_or(0.0);
            let alpha = src.alpha.unwrap_or(0.0);
            let outer = match kind {
                OuterKind::Standard => {
                    if src.sigma.is_some() || src.mu.is_some() || src.alpha.is_some() {
                        return Err(config_error("--outer standard takes no --sigma, --mu or --alpha"));
                    }
                    json!({"kind": "standard"})
                }
                OuterKind::Lr => json!({"kind": "outer_lr", "sigma": sigma}),
                OuterKind::Nesterov => json!({"kind": "outer_nesterov", "sigma": sigma, "mu": mu}),
                OuterKind::Biased => json!({"kind": "biased_init", "alpha": alpha, "mu": mu}),
            };
            set("outer", outer)?;
        }
        None => {
            for (name, value) in [("sigma", src.sigma), ("mu", src.mu), ("alpha", src.alpha)] {
                if let Some(x) = value {
                    set(&format!("outer.{name}"), json!(x))?;
                }
            }
        }
    }
    for o in &src.sets {
        let (path, raw) = o
            .split_once('=')
            .ok_or_else(|| config_error(format!("override `{o}` is not of the form key=value")))?;
        set(path.trim(), parse_scalar(raw.trim()))?;
    }
    let cfg = RunConfig::from_value(v).map_err(config_error)?;
    cfg.validate().map_err(config_error)?;
    Ok(cfg)
}

/// Byte lengths of the event logs at the moment a trainer checkpoint was
/// taken, so a resumed run can cut off anything written after it.
#[derive(Debug, Serialize, Deserialize)]
struct Offsets {
    iteration: u64,
    events: u64,
    outer: u64,
}

struct Logs {
    events: BufWriter<File>,
    outer: BufWriter<File>,
    events_len: u64,
    outer_len: u64,
    error: Option<std::io::Error>,
    quiet: bool,
}

impl Logs {
    fn open(dir: &Path, offsets: Option<&Offsets>, quiet: bool) -> anyhow::Result<Logs> {
        let open = |name: &str, keep: Option<u64>| -> anyhow::Result<File> {
            let path = dir.join(name);
            Ok(match keep {
                Some(len) => {
                    let f = OpenOptions::new().write(true).open(&path)?;
                    f.set_len(len)?;
                    OpenOptions::new().append(true).open(&path)?
                }
                None => File::create(&path)?,
            })
        };
        Ok(Logs {
            events: BufWriter::new(open(EVENTS, offsets.map(|o| o.events))?),
            outer: BufWriter::new(open(OUTER_EVENTS, offsets.map(|o| o.outer))?),
            events_len: offsets.map_or(0, |o| o.events),
            outer_len: offsets.map_or(0, |o| o.outer),
            error: None,
            quiet,
        })
    }

    fn record(&mut self, e: &Event) {
        let mut line = serde_json::to_string(e).expect("events serialize");
        line.push('\n');
        let (w, len) = match e {
            Event::Outer(_) => (&mut self.outer, &mut self.outer_len),
            _ => (&mut self.events, &mut self.events_len),
        };
        if let Err(err) = w.write_all(line.as_bytes()) {
            self.error.get_or_insert(err);
        }
        *len += line.len() as u64;
        if !self.quiet {
            match e {
                Event::Eval(p) => println!(
                    "eval {} iteration={} transitions={} mean_return={:.4}",
                    p.index, p.iteration, p.transitions, p.mean_return
                ),
                Event::Aborted { iteration, reason } => println!("aborted iteration={iteration} reason={reason}"),
                Event::Absolute { best_index, mean_return, episodes } => {
                    println!("absolute best_index={best_index} episodes={episodes} mean_return={mean_return:.4}")
                }
                _ => {}
            }
        }
    }

    fn flush(&mut self) -> anyhow::Result<()> {
        if let Some(e) = self.error.take() {
            return Err(e.into());
        }
        self.events.flush()?;
        self.outer.flush()?;
        Ok(())
    }
}

fn checkpoint(dir: &Path, t: &Trainer, logs: &mut Logs) -> anyhow::Result<()> {
    logs.flush()?;
    write_atomic(&dir.join(TRAINER_CHECKPOINT), &trainer_to_bytes(t))?;
    let offsets = Offsets {
        iteration: t.iteration(),
        events: logs.events_len,
        outer: logs.outer_len,
    };
    write_atomic(&dir.join(TRAINER_OFFSETS), serde_json::to_string(&offsets)?.as_bytes())
}

pub fn run(args: &TrainArgs) -> anyhow::Result<i32> {
    let dir = &args.out;
    let (mut trainer, offsets) = if args.resume {
        let t = load_trainer(&dir.join(TRAINER_CHECKPOINT)).context("loading trainer checkpoint")?;
        let o: Offsets = serde_json::from_str(&fs::read_to_string(dir.join(TRAINER_OFFSETS))?)?;
        if o.iteration != t.iteration() {
            bail!("{TRAINER_OFFSETS} is for iteration {} but the checkpoint is at {}", o.iteration, t.iteration());
        }
        (t, Some(o))
    } else {
        let cfg = resolve_config(&args.source)?;
        let t = Trainer::new(cfg).map_err(config_error)?;
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_atomic(&dir.join(RESOLVED_CONFIG), t.config().to_json().as_bytes())?;
        (t, None)
    };
    let cfg = trainer.config().clone();
    let mut logs = Logs::open(dir, offsets.as_ref(), args.quiet)?;

    let every = match (args.checkpoint_every, args.stop_at) {
        (Some(0), _) => return Err(config_error("--checkpoint-every must be positive")),
        (Some(k), _) => Some(k),
        (None, Some(s)) => Some(s.max(1)),
        (None, None) => None,
    };
    match every {
        Some(every) => {
            while !trainer.is_done() {
                let mut target = trainer.iteration() + every;
                if let Some(s) = args.stop_at {
                    target = target.min(s.max(trainer.iteration() + 1));
                }
                trainer.run_until(target, &mut |e| logs.record(e))?;
                checkpoint(dir, &trainer, &mut logs)?;
                if args.stop_at.is_some_and(|s| trainer.iteration() >= s) && !trainer.is_done() {
                    println!("stopped at iteration {}; continue with --resume", trainer.iteration());
                    return Ok(EXIT_OK);
                }
            }
        }
        None => trainer.run(&mut |e| logs.record(e))?,
    }
    write_atomic(&dir.join(FINAL_CHECKPOINT), &trainer_to_bytes(&trainer))?;
    let result = trainer.finish(&mut |e| logs.record(e))?;
    logs.flush()?;
    if let Some(best) = &result.best_theta {
        save_policy(&dir.join(BEST_CHECKPOINT), best)?;
    }
    let summary = RunSummary::new(&cfg, &result);
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    write_atomic(&dir.join(SUMMARY), text.as_bytes())?;
    println!("{}", serde_json::to_string(&summary)?);
    Ok(if result.nan_aborted { EXIT_ABORTED } else { EXIT_OK })
}
