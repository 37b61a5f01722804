use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::Path;

use anyhow::{bail, Context};
use outer_ppo::driver::RunSummary;
use outer_ppo::metrics::{
    aggregate_point_estimates, normalize, performance_profile, probability_of_improvement, sample_efficiency_curve,
    AggregateEstimates, CurvePoint, Interval, NormalizationTable, RunCurve, ScoreMatrix,
};
use serde::{Deserialize, Serialize};

use crate::args::MetricsArgs;
use crate::{config_error, write_atomic, EXIT_OK};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    /// Runs with an absolute score.
    pub scored_runs: usize,
    /// Runs that stopped on a numerical error and carry no score.
    pub aborted_runs: usize,
    pub aggregates: AggregateEstimates,
    /// Fraction of runs above each threshold in [`MetricsReport::thresholds`].
    pub profile: Vec<f64>,
    pub efficiency: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoiEntry {
    pub method: String,
    pub baseline: String,
    pub poi: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub replicates: usize,
    pub confidence: f64,
    pub seed: u64,
    pub normalization: NormalizationTable,
    pub thresholds: Vec<f64>,
    pub methods: BTreeMap<String, MethodMetrics>,
    pub poi: Vec<PoiEntry>,
}

/// Reads run summaries from JSON-lines files or single pretty-printed
/// summaries.
pub fn read_summaries(paths: &[impl AsRef<Path>]) -> anyhow::Result<Vec<RunSummary>> {
    let mut out = Vec::new();
    for p in paths {
        let p = p.as_ref();
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        for s in serde_json::Deserializer::from_str(&text).into_iter::<RunSummary>() {
            out.push(s.with_context(|| format!("parsing {}", p.display()))?);
        }
    }
    Ok(out)
}

pub fn normalization_table(source: &str, raw: &BTreeMap<String, ScoreMatrix>) -> anyhow::Result<NormalizationTable> {
    Ok(match source {
        "reference" => NormalizationTable::reference(),
        "local" => NormalizationTable::from_scores(raw.values()).map_err(config_error)?,
        path => NormalizationTable::read_csv(File::open(path).with_context(|| format!("opening {path}"))?)
            .map_err(config_error)?,
    })
}

pub struct MetricsOptions<'a> {
    pub normalization: &'a str,
    pub baseline: Option<&'a str>,
    pub replicates: usize,
    pub confidence: f64,
    pub seed: u64,
    pub profile_points: usize,
}

pub fn compute(runs: &[RunSummary], opts: &MetricsOptions) -> anyhow::Result<MetricsReport> {
    if runs.is_empty() {
        return Err(config_error("no run summaries to aggregate"));
    }
    let raw = ScoreMatrix::from_summaries(runs);
    if raw.is_empty() {
        bail!("every run aborted; nothing to score");
    }
    let table = normalization_table(opts.normalization, &raw)?;
    let normalized: BTreeMap<String, ScoreMatrix> = raw
        .iter()
        .map(|(m, s)| Ok((m.clone(), normalize(s, &table)?)))
        .collect::<outer_ppo::Result<_>>()?;

    let top = normalized
        .values()
        .flat_map(|m| m.pooled())
        .fold(1.0f64, f64::max);
    let n = opts.profile_points.max(2);
    let thresholds: Vec<f64> = (0..n).map(|i| top * i as f64 / (n - 1) as f64).collect();

    let mut methods = BTreeMap::new();
    for (name, m) in &normalized {
        let curves: Vec<RunCurve> = runs
            .iter()
            .filter(|r| &r.method == name)
            .map(|r| RunCurve {
                task: r.task.clone(),
                points: r.curve.clone(),
            })
            .collect();
        methods.insert(
            name.clone(),
            MethodMetrics {
                scored_runs: m.pooled().len(),
                aborted_runs: runs.iter().filter(|r| &r.method == name && r.score.is_none()).count(),
                aggregates: aggregate_point_estimates(m, opts.replicates, opts.confidence, opts.seed)?,
                profile: performance_profile(m, &thresholds)?,
                efficiency: sample_efficiency_curve(&curves, &table)?,
            },
        );
    }

    let mut poi = Vec::new();
    if let Some(base) = opts.baseline {
        let y = normalized
            .get(base)
            .ok_or_else(|| config_error(format!("baseline method `{base}` has no scored runs")))?;
        for (name, x) in &normalized {
            if name != base {
                poi.push(PoiEntry {
                    method: name.clone(),
                    baseline: base.into(),
                    poi: probability_of_improvement(x, y, opts.replicates, opts.confidence, opts.seed)?,
                });
            }
        }
    }
    Ok(MetricsReport {
        replicates: opts.replicates,
        confidence: opts.confidence,
        seed: opts.seed,
        normalization: table,
        thresholds,
        methods,
        poi,
    })
}

pub fn run(args: &MetricsArgs) -> anyhow::Result<i32> {
    let runs = read_summaries(&args.scores)?;
    let report = compute(
        &runs,
        &MetricsOptions {
            normalization: &args.normalization,
            baseline: args.baseline.as_deref(),
            replicates: args.replicates,
            confidence: args.confidence,
            seed: args.seed,
            profile_points: args.profile_points,
        },
    )?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    match &args.out {
        Some(p) => write_atomic(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(EXIT_OK)
}
