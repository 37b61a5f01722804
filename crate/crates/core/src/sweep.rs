//! Grid and random hyperparameter sweeps with multi-seed trials.
//!
//! Results go to an append-only JSON-lines file. Records are written in job
//! order (trial, then agent) by a single writer regardless of how many
//! workers run, so an interrupted sweep's file is always a prefix of the
//! uninterrupted one and resuming reproduces it byte for byte.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{get_path, set_path, RunConfig};
use crate::driver::{train, RunSummary};
use crate::error::{Error, Result};
use crate::metrics::NormalizationTable;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    FinalEvalMean,
    BestEvalMean,
}

impl Objective {
    pub fn of(&self, s: &RunSummary) -> Option<f64> {
        match self {
            Objective::FinalEvalMean => s.final_eval_mean,
            Objective::BestEvalMean => s.best_eval_mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// Dotted path into the run config, e.g. `outer.sigma`.
    pub path: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Log,
    /// Integer uniform over `[low, high]`.
    Integer,
    /// `2^k` with `k` uniform over the integer exponents in range.
    PowerOfTwo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomAxis {
    pub path: String,
    pub low: f64,
    pub high: f64,
    pub scale: Scale,
}

impl RandomAxis {
    pub fn sample(&self, rng: &mut Stream) -> Value {
        match self.scale {
            Scale::Linear => Value::from(rng.uniform_range(self.low, self.high)),
            Scale::Log => Value::from(rng.uniform_range(self.low.ln(), self.high.ln()).exp()),
            Scale::Integer => {
                let (lo, hi) = (self.low.ceil() as u64, self.high.floor() as u64);
                Value::from(lo + rng.below(hi - lo + 1))
            }
            Scale::PowerOfTwo => {
                let (lo, hi) = (self.low.log2().ceil() as u64, self.high.log2().floor() as u64);
                Value::from(1u64 << (lo + rng.below(hi - lo + 1)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSearch {
    pub trials: usize,
    pub axes: Vec<RandomAxis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub name: String,
    pub base: RunConfig,
    /// Cartesian grid; the first axis varies slowest.
    #[serde(default)]
    pub axes: Vec<Axis>,
    /// Uniform random search used instead of the grid when present.
    #[serde(default)]
    pub random: Option<RandomSearch>,
    pub seeds_per_trial: usize,
    #[serde(default)]
    pub objective: Objective,
    #[serde(default)]
    pub root_seed: u64,
}

pub type Assignment = Vec<(String, Value)>;

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub id: u64,
    pub assignment: Assignment,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.seeds_per_trial == 0 {
            return Err(Error::Config("seeds_per_trial must be >= 1".into()));
        }
        match &self.random {
            Some(r) if r.trials == 0 || r.axes.is_empty() => {
                Err(Error::Config("random search needs trials >= 1 and at least one axis".into()))
            }
            None if self.axes.is_empty() || self.axes.iter().any(|a| a.values.is_empty()) => {
                Err(Error::Config("grid sweep needs non-empty axes".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn trials(&self) -> Result<Vec<Trial>> {
        self.validate()?;
        let assignments: Vec<Assignment> = match &self.random {
            Some(r) => {
                let root = Stream::new(self.root_seed).split_named("search");
                (0..r.trials as u64)
                    .map(|t| {
                        let mut rng = root.split(t);
                        r.axes.iter().map(|a| (a.path.clone(), a.sample(&mut rng))).collect()
                    })
                    .collect()
            }
            None => {
                let mut out: Vec<Assignment> = vec![Vec::new()];
                for axis in &self.axes {
                    out = out
                        .into_iter()
                        .flat_map(|prefix| {
                            axis.values.iter().map(move |v| {
                                let mut a = prefix.clone();
                                a.push((axis.path.clone(), v.clone()));
                                a
                            })
                        })
                        .collect();
                }
                out
            }
        };
        Ok(assignments
            .into_iter()
            .enumerate()
            .map(|(i, assignment)| Trial {
                id: i as u64,
                assignment,
            })
            .collect())
    }

    /// Seed of agent `agent` in trial `trial`.
    pub fn seed_for(&self, trial: u64, agent: u64) -> u64 {
        Stream::new(self.root_seed).split(trial).split(agent).next_u64()
    }

    pub fn trial_config(&self, trial: &Trial, agent: u64) -> Result<RunConfig> {
        let mut v = self.base.to_value();
        for (path, value) in &trial.assignment {
            set_path(&mut v, path, value.clone())?;
        }
        set_path(&mut v, "seed", Value::from(self.seed_for(trial.id, agent)))?;
        let cfg = RunConfig::from_value(v).map_err(|e| Error::Config(format!("trial {}: {e}", trial.id)))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// True when every trial leaves the base PPO hyperparameters unchanged.
    pub fn baseline_frozen(&self) -> Result<bool> {
        for t in self.trials()? {
            if self.trial_config(&t, 0)?.ppo != self.base.ppo {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub trial: u64,
    pub agent: u64,
    pub seed: u64,
    pub assignment: Assignment,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Done,
    Nan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub assignment: Assignment,
    /// Mean over seeds; absent for NaN trials.
    pub objective: Option<f64>,
    pub status: TrialStatus,
    pub seed_objectives: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum SweepRecord {
    Seed(SeedRecord),
    Trial(TrialRecord),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepResult {
    pub seeds: Vec<SeedRecord>,
    pub trials: Vec<TrialRecord>,
}

impl SweepResult {
    /// Reads a results file, ignoring a trailing partial line. Returns the
    /// byte length of the valid prefix alongside the records.
    pub fn read(path: &Path) -> Result<(SweepResult, u64)> {
        let mut out = SweepResult::default();
        if !path.exists() {
            return Ok((out, 0));
        }
        let mut reader = BufReader::new(File::open(path)?);
        let mut valid = 0u64;
        let mut line = String::new();
        let mut seen = BTreeSet::new();
        loop {
            line.clear();
            let n = reader.read_line(&mut line)?;
            if n == 0 || !line.ends_with('\n') {
                break;
            }
            let rec: SweepRecord = match serde_json::from_str(line.trim_end()) {
                Ok(r) => r,
                Err(_) => {
                    if reader.fill_buf()?.is_empty() {
                        break;
                    }
                    return Err(Error::Format(format!("corrupt sweep record at byte {valid}")));
                }
            };
            match rec {
                SweepRecord::Seed(s) => out.seeds.push(s),
                SweepRecord::Trial(t) => {
                    if !seen.insert(t.trial) {
                        return Err(Error::DuplicateTrial(t.trial));
                    }
                    out.trials.push(t)
                }
            }
            valid += n as u64;
        }
        Ok((out, valid))
    }
}

pub fn summarize_trial(trial: &Trial, seeds: &[&SeedRecord], objective: Objective) -> TrialRecord {
    let seed_objectives: Vec<Option<f64>> = seeds
        .iter()
        .map(|s| if s.summary.nan_aborted { None } else { objective.of(&s.summary) })
        .collect();
    let complete: Vec<f64> = seed_objectives.iter().flatten().copied().collect();
    let ok = complete.len() == seeds.len() && !seeds.is_empty();
    TrialRecord {
        trial: trial.id,
        assignment: trial.assignment.clone(),
        objective: ok.then(|| complete.iter().sum::<f64>() / complete.len() as f64),
        status: if ok { TrialStatus::Done } else { TrialStatus::Nan },
        seed_objectives,
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub workers: usize,
    /// Stop after this many newly run seeds (used to simulate interruption).
    pub stop_after: Option<usize>,
}

/// Runs (or resumes) a sweep, appending to `results`. Returns every record
/// in the file afterwards.
pub fn run_sweep(spec: &SweepSpec, results: &Path, opts: &SweepOptions) -> Result<SweepResult> {
    run_sweep_with(spec, results, opts, &|_| {})
}

pub fn run_sweep_with(
    spec: &SweepSpec,
    results: &Path,
    opts: &SweepOptions,
    progress: &(dyn Fn(&SweepRecord) + Sync),
) -> Result<SweepResult> {
    let trials = spec.trials()?;
    let (existing, valid_len) = SweepResult::read(results)?;
    let mut file = OpenOptions::new().create(true).append(true).open(results)?;
    if file.metadata()?.len() != valid_len {
        file.set_len(valid_len)?;
    }
    let mut done: BTreeMap<(u64, u64), SeedRecord> =
        existing.seeds.iter().map(|s| ((s.trial, s.agent), s.clone())).collect();
    let mut summarized: BTreeSet<u64> = existing.trials.iter().map(|t| t.trial).collect();

    let mut seeds_seen = BTreeSet::new();
    let mut jobs = Vec::new();
    for t in &trials {
        for a in 0..spec.seeds_per_trial as u64 {
            if !seeds_seen.insert(spec.seed_for(t.id, a)) {
                return Err(Error::Config(format!("seed collision at trial {} agent {a}", t.id)));
            }
            if !done.contains_key(&(t.id, a)) {
                // Fail on bad assignments before any work starts.
                spec.trial_config(t, a)?;
                jobs.push((t.id, a));
            }
        }
    }
    if let Some(n) = opts.stop_after {
        jobs.truncate(n);
    }

    let write = |rec: &SweepRecord, file: &mut File| -> Result<()> {
        let mut line = serde_json::to_string(rec)?;
        line.push('\n');
        file.write_all(line.as_bytes())?;
        file.flush()?;
        progress(rec);
        Ok(())
    };
    // Seeds complete in job order, so summarizing every finished trial after
    // each write reproduces the uninterrupted record order.
    let flush = |done: &BTreeMap<(u64, u64), SeedRecord>, summarized: &mut BTreeSet<u64>, file: &mut File| -> Result<()> {
        for t in &trials {
            if summarized.contains(&t.id) {
                continue;
            }
            let seeds: Vec<&SeedRecord> = (0..spec.seeds_per_trial as u64).filter_map(|a| done.get(&(t.id, a))).collect();
            if seeds.len() == spec.seeds_per_trial {
                summarized.insert(t.id);
                write(&SweepRecord::Trial(summarize_trial(t, &seeds, spec.objective)), file)?;
            }
        }
        Ok(())
    };

    let workers = opts.workers.max(1);
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(usize, Result<SeedRecord>)>();
    let outcome: Result<()> = std::thread::scope(|scope| {
        for _ in 0..workers.min(jobs.len()) {
            let tx = tx.clone();
            let (jobs, next, failed, trials) = (&jobs, &next, &failed, &trials);
            scope.spawn(move || loop {
                if failed.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(tid, agent)) = jobs.get(i) else { break };
                let trial = &trials[tid as usize];
                let rec = spec.trial_config(trial, agent).and_then(|cfg| {
                    let result = train(&cfg)?;
                    Ok(SeedRecord {
                        trial: tid,
                        agent,
                        seed: cfg.seed,
                        assignment: trial.assignment.clone(),
                        summary: RunSummary::new(&cfg, &result),
                    })
                });
                if tx.send((i, rec)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        flush(&done, &mut summarized, &mut file)?;
        let mut pending: BTreeMap<usize, SeedRecord> = BTreeMap::new();
        let mut cursor = 0;
        for (i, rec) in rx {
            let rec = match rec {
                Ok(r) => r,
                Err(e) => {
                    failed.store(true, Ordering::Relaxed);
                    return Err(e);
                }
            };
            pending.insert(i, rec);
            while let Some(rec) = pending.remove(&cursor) {
                write(&SweepRecord::Seed(rec.clone()), &mut file)?;
                done.insert((rec.trial, rec.agent), rec);
                cursor += 1;
                flush(&done, &mut summarized, &mut file)?;
            }
        }
        Ok(())
    });
    outcome?;
    Ok(SweepResult::read(results)?.0)
}

/// Argmax of the objective over completed trials; ties go to the lowest id.
pub fn best_trial(trials: &[TrialRecord]) -> Option<&TrialRecord> {
    let mut best: Option<&TrialRecord> = None;
    for t in trials {
        if let Some(v) = t.objective {
            let better = match best {
                None => true,
                Some(b) => v > b.objective.expect("best has objective") || (v == b.objective.unwrap() && t.trial < b.trial),
            };
            if better {
                best = Some(t);
            }
        }
    }
    best
}

/// Looks up the value an assignment gives to `path`.
pub fn assigned<'a>(a: &'a Assignment, path: &str) -> Option<&'a Value> {
    a.iter().find(|(p, _)| p == path).map(|(_, v)| v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityPoint {
    pub x: f64,
    /// NaN marks a gap.
    pub mean: f64,
    pub stderr: f64,
    pub seeds: usize,
}

fn as_f64(v: &Value, path: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::Config(format!("axis `{path}` value {v} is not numeric")))
}

fn normalizer<'a>(table: Option<&'a NormalizationTable>, task: &'a str) -> impl Fn(f64) -> Result<f64> + 'a {
    move |v| match table {
        Some(t) => t.normalize_value(task, v),
        None => Ok(v),
    }
}

/// Mean objective and its standard error across seeds for each value of
/// `axis`. Trials with any aborted seed become gaps.
pub fn sensitivity_1d(
    result: &SweepResult,
    axis: &str,
    task: &str,
    table: Option<&NormalizationTable>,
) -> Result<Vec<SensitivityPoint>> {
    if result.trials.is_empty() {
        return Err(Error::Empty("sweep trials"));
    }
    let norm = normalizer(table, task);
    let mut by_x: BTreeMap<u64, (f64, Vec<f64>, bool)> = BTreeMap::new();
    for t in &result.trials {
        let x = as_f64(
            assigned(&t.assignment, axis).ok_or_else(|| Error::Config(format!("trial {} has no `{axis}`", t.trial)))?,
            axis,
        )?;
        let e = by_x.entry(x.to_bits()).or_insert((x, Vec::new(), false));
        if t.status == TrialStatus::Nan {
            e.2 = true;
        }
        for v in t.seed_objectives.iter().flatten() {
            e.1.push(norm(*v)?);
        }
    }
    let mut out: Vec<SensitivityPoint> = by_x
        .into_values()
        .map(|(x, vals, gap)| {
            let n = vals.len();
            if gap || n == 0 {
                return SensitivityPoint {
                    x,
                    mean: f64::NAN,
                    stderr: f64::NAN,
                    seeds: n,
                };
            }
            let mean = vals.iter().sum::<f64>() / n as f64;
            let stderr = if n > 1 {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 / n as f64).sqrt()
            } else {
                0.0
            };
            SensitivityPoint { x, mean, stderr, seeds: n }
        })
        .collect();
    out.sort_by(|a, b| a.x.total_cmp(&b.x));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub x_axis: String,
    pub y_axis: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `values[j][i]` at `(xs[i], ys[j])`; `None` is a gap.
    pub values: Vec<Vec<Option<f64>>>,
}

/// Mean trial objective on the `(x, y)` grid. Missing and NaN trials are gaps.
pub fn sensitivity_2d(
    result: &SweepResult,
    x_axis: &str,
    y_axis: &str,
    task: &str,
    table: Option<&NormalizationTable>,
) -> Result<Surface> {
    if result.trials.is_empty() {
        return Err(Error::Empty("sweep trials"));
    }
    let norm = normalizer(table, task);
    let mut cells: BTreeMap<(u64, u64), (f64, f64, Option<f64>)> = BTreeMap::new();
    for t in &result.trials {
        let get = |p: &str| -> Result<f64> {
            as_f64(
                assigned(&t.assignment, p).ok_or_else(|| Error::Config(format!("trial {} has no `{p}`", t.trial)))?,
                p,
            )
        };
        let (x, y) = (get(x_axis)?, get(y_axis)?);
        let v = match t.objective {
            Some(o) if t.status == TrialStatus::Done => Some(norm(o)?),
            _ => None,
        };
        cells.insert((x.to_bits(), y.to_bits()), (x, y, v));
    }
    let mut xs: Vec<f64> = cells.values().map(|c| c.0).collect();
    let mut ys: Vec<f64> = cells.values().map(|c| c.1).collect();
    for v in [&mut xs, &mut ys] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let values = ys
        .iter()
        .map(|y| {
            xs.iter()
                .map(|x| cells.get(&(x.to_bits(), y.to_bits())).and_then(|c| c.2))
                .collect()
        })
        .collect();
    Ok(Surface {
        x_axis: x_axis.into(),
        y_axis: y_axis.into(),
        xs,
        ys,
        values,
    })
}

/// One CSV row per trial: id, axis values, objective (blank for gaps), status.
pub fn export_csv<W: Write>(result: &SweepResult, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let paths: Vec<String> = result
        .trials
        .first()
        .map(|t| t.assignment.iter().map(|(p, _)| p.clone()).collect())
        .unwrap_or_default();
    let mut header = vec!["trial".to_string()];
    header.extend(paths.iter().cloned());
    header.extend(["objective".to_string(), "status".to_string()]);
    wr.write_record(&header)?;
    for t in &result.trials {
        let mut row = vec![t.trial.to_string()];
        for p in &paths {
            row.push(assigned(&t.assignment, p).map(|v| v.to_string()).unwrap_or_default());
        }
        row.push(t.objective.map(|o| o.to_string()).unwrap_or_default());
        row.push(match t.status {
            TrialStatus::Done => "done".into(),
            TrialStatus::Nan => "nan".into(),
        });
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads `path` out of a JSON config tree as a number, for display.
pub fn numeric_at(v: &Value, path: &str) -> Option<f64> {
    get_path(v, path).and_then(Value::as_f64)
}
