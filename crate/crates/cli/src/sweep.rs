use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use outer_ppo::config::{parse_scalar, set_path};
use outer_ppo::presets::{preset, Preset};
use outer_ppo::sweep::{
    best_trial, export_csv, run_sweep_with, SweepOptions, SweepRecord, SweepResult, SweepSpec, TrialStatus,
};

use crate::args::{ExportFormat, SweepAction, SweepArgs};
use crate::{config_error, EXIT_OK};

/// Loads a spec from a file or preset and applies `--set` overrides, then
/// checks every trial config before anything runs.
pub fn resolve_spec(spec: Option<&Path>, preset_name: Option<&str>, sets: &[String]) -> anyhow::Result<SweepSpec> {
    let base = match (spec, preset_name) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<SweepSpec>(&text).map_err(config_error)?
        }
        (None, Some(name)) => match preset(name).map_err(config_error)? {
            Preset::Sweep(s) => *s,
            _ => return Err(config_error(format!("preset `{name}` is not a sweep"))),
        },
        (None, None) => return Err(config_error("one of --spec or --preset is required")),
    };
    let mut v = serde_json::to_value(&base)?;
    for o in sets {
        let (path, raw) = o
            .split_once('=')
            .ok_or_else(|| config_error(format!("override `{o}` is not of the form key=value")))?;
        set_path(&mut v, path.trim(), parse_scalar(raw.trim())).map_err(config_error)?;
    }
    let spec: SweepSpec = serde_json::from_value(v).map_err(config_error)?;
    for t in spec.trials().map_err(config_error)? {
        spec.trial_config(&t, 0).map_err(config_error)?;
    }
    Ok(spec)
}

fn report(record: &SweepRecord) {
    match record {
        SweepRecord::Seed(s) => println!(
            "seed trial={} agent={} final={} aborted={}",
            s.trial,
            s.agent,
            s.summary.final_eval_mean.map_or("-".into(), |v| format!("{v:.4}")),
            s.summary.nan_aborted
        ),
        SweepRecord::Trial(t) => println!(
            "trial {} objective={} status={}",
            t.trial,
            t.objective.map_or("-".into(), |v| format!("{v:.4}")),
            if t.status == TrialStatus::Done { "done" } else { "nan" }
        ),
    }
}

pub fn run(args: &SweepArgs) -> anyhow::Result<i32> {
    match &args.action {
        SweepAction::Run {
            spec,
            preset,
            sets,
            results,
            workers,
            stop_after,
            quiet,
        } => {
            let spec = resolve_spec(spec.as_deref(), preset.as_deref(), sets)?;
            let opts = SweepOptions {
                workers: *workers,
                stop_after: *stop_after,
            };
            let quiet = *quiet;
            let result = run_sweep_with(&spec, results, &opts, &|r| {
                if !quiet {
                    report(r)
                }
            })?;
            let total = spec.trials()?.len();
            println!("{} of {total} trials summarized", result.trials.len());
            if let Some(best) = best_trial(&result.trials) {
                println!("best {}", serde_json::to_string(best)?);
            }
            Ok(EXIT_OK)
        }
        SweepAction::Export { results, format, out } => {
            let (result, _) = SweepResult::read(results)?;
            match format {
                ExportFormat::Csv => match out {
                    Some(p) => {
                        let mut w = BufWriter::new(File::create(p)?);
                        export_csv(&result, &mut w)?;
                        w.flush()?;
                    }
                    None => export_csv(&result, io::stdout().lock())?,
                },
            }
            Ok(EXIT_OK)
        }
    }
}
