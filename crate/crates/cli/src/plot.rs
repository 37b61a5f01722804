//! Plots rendered from a metrics report or a sweep results file. Every plot
//! is written as `<kind>.svg` together with `<kind>.csv` holding exactly the
//! plotted numbers. Missing values are blank in the CSV and left empty in
//! the figure.

use std::fs::{self, File};
use std::path::Path;

use anyhow::{bail, Context};
use outer_ppo::metrics::NormalizationTable;
use outer_ppo::sweep::{sensitivity_1d, sensitivity_2d, SensitivityPoint, Surface, SweepResult};

use crate::args::{PlotArgs, PlotKind};
use crate::metrics::MetricsReport;
use crate::svg::{color, extent, heat, Canvas};
use crate::{config_error, write_atomic, EXIT_OK};

pub struct Figure {
    pub svg: String,
    pub csv: String,
}

fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

fn table(header: &[&str], rows: Vec<Vec<String>>) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)?)
}

fn require_methods(r: &MetricsReport) -> anyhow::Result<()> {
    if r.methods.is_empty() {
        return Err(config_error("metrics report has no methods"));
    }
    Ok(())
}

const LEFT: f64 = 110.0;
const TOP: f64 = 40.0;

pub fn aggregates(r: &MetricsReport) -> anyhow::Result<Figure> {
    require_methods(r)?;
    let names: Vec<&String> = r.methods.keys().collect();
    let stats = ["median", "iqm", "mean", "optimality_gap"];
    let mut rows = Vec::new();
    for name in &names {
        let a = &r.methods[*name].aggregates;
        for (stat, i) in stats.iter().zip([a.median, a.iqm, a.mean, a.optimality_gap]) {
            rows.push(vec![name.to_string(), stat.to_string(), num(i.estimate), num(i.lower), num(i.upper)]);
        }
    }
    let (pw, ph) = (170.0, 28.0 * names.len() as f64 + 20.0);
    let mut c = Canvas::new(LEFT + 4.0 * (pw + 30.0), TOP + ph + 50.0);
    for (k, stat) in stats.iter().enumerate() {
        let vals = names.iter().flat_map(|n| {
            let a = &r.methods[*n].aggregates;
            let i = [a.median, a.iqm, a.mean, a.optimality_gap][k];
            [i.lower, i.upper, i.estimate]
        });
        let xr = extent(vals).unwrap_or((0.0, 1.0));
        let mut p = c.panel(LEFT + k as f64 * (pw + 30.0), TOP, pw, ph, xr, (-0.5, names.len() as f64 - 0.5));
        p.title(stat);
        p.axes("normalized score", "", true, false);
        if k == 0 {
            p.y_labels(&names.iter().enumerate().map(|(j, n)| (j as f64, n.to_string())).collect::<Vec<_>>());
        }
        for (j, n) in names.iter().enumerate() {
            let a = &r.methods[*n].aggregates;
            let i = [a.median, a.iqm, a.mean, a.optimality_gap][k];
            p.interval(j as f64, 9.0, i.lower, i.estimate, i.upper, color(j));
        }
    }
    Ok(Figure {
        svg: c.finish(),
        csv: table(&["method", "statistic", "estimate", "lower", "upper"], rows)?,
    })
}

pub fn poi(r: &MetricsReport) -> anyhow::Result<Figure> {
    if r.poi.is_empty() {
        return Err(config_error("metrics report has no probability-of-improvement entries (pass --baseline)"));
    }
    let rows: Vec<Vec<String>> = r
        .poi
        .iter()
        .map(|e| vec![e.method.clone(), e.baseline.clone(), num(e.poi.estimate), num(e.poi.lower), num(e.poi.upper)])
        .collect();
    let ph = 28.0 * r.poi.len() as f64 + 20.0;
    let mut c = Canvas::new(LEFT + 360.0 + 40.0, TOP + ph + 50.0);
    let mut p = c.panel(LEFT + 40.0, TOP, 340.0, ph, (0.0, 1.0), (-0.5, r.poi.len() as f64 - 0.5));
    p.title("probability of improvement");
    p.axes("P(X > Y)", "", true, false);
    p.vline(0.5, true);
    p.y_labels(
        &r.poi
            .iter()
            .enumerate()
            .map(|(j, e)| (j as f64, format!("{} vs {}", e.method, e.baseline)))
            .collect::<Vec<_>>(),
    );
    for (j, e) in r.poi.iter().enumerate() {
        p.interval(j as f64, 9.0, e.poi.lower, e.poi.estimate, e.poi.upper, color(j));
    }
    Ok(Figure {
        svg: c.finish(),
        csv: table(&["method", "baseline", "estimate", "lower", "upper"], rows)?,
    })
}

pub fn profile(r: &MetricsReport) -> anyhow::Result<Figure> {
    require_methods(r)?;
    if r.thresholds.is_empty() {
        return Err(config_error("metrics report has no profile thresholds"));
    }
    let mut rows = Vec::new();
    let xr = extent(r.thresholds.iter().cloned()).unwrap_or((0.0, 1.0));
    let mut c = Canvas::new(560.0, 380.0);
    let mut p = c.panel(70.0, TOP, 340.0, 280.0, xr, (0.0, 1.05));
    p.title("performance profile");
    p.axes("normalized score threshold", "fraction of runs above", true, true);
    let mut legend = Vec::new();
    for (j, (name, m)) in r.methods.iter().enumerate() {
        let pts: Vec<(f64, f64)> = r.thresholds.iter().cloned().zip(m.profile.iter().cloned()).collect();
        p.line(&pts, color(j));
        rows.extend(pts.iter().map(|(t, f)| vec![name.clone(), num(*t), num(*f)]));
        legend.push((name.clone(), color(j)));
    }
    c.legend(425.0, TOP + 10.0, &legend);
    Ok(Figure {
        svg: c.finish(),
        csv: table(&["method", "threshold", "fraction"], rows)?,
    })
}

pub fn efficiency(r: &MetricsReport) -> anyhow::Result<Figure> {
    require_methods(r)?;
    let all = r.methods.values().flat_map(|m| m.efficiency.iter());
    let xr = extent(all.clone().map(|p| p.transitions as f64)).ok_or_else(|| config_error("no efficiency curves"))?;
    let yr = extent(all.flat_map(|p| [p.mean - p.stderr, p.mean + p.stderr])).unwrap_or((0.0, 1.0));
    let mut rows = Vec::new();
    let mut c = Canvas::new(560.0, 380.0);
    let mut p = c.panel(70.0, TOP, 340.0, 280.0, xr, yr);
    p.title("sample efficiency");
    p.axes("transitions", "normalized return", true, true);
    let mut legend = Vec::new();
    for (j, (name, m)) in r.methods.iter().enumerate() {
        let xs: Vec<f64> = m.efficiency.iter().map(|q| q.transitions as f64).collect();
        let lo: Vec<f64> = m.efficiency.iter().map(|q| q.mean - q.stderr).collect();
        let hi: Vec<f64> = m.efficiency.iter().map(|q| q.mean + q.stderr).collect();
        p.band(&xs, &lo, &hi, color(j));
        p.line(&m.efficiency.iter().map(|q| (q.transitions as f64, q.mean)).collect::<Vec<_>>(), color(j));
        rows.extend(m.efficiency.iter().map(|q| {
            vec![name.clone(), q.transitions.to_string(), num(q.mean), num(q.stderr), q.runs.to_string()]
        }));
        legend.push((name.clone(), color(j)));
    }
    c.legend(425.0, TOP + 10.0, &legend);
    Ok(Figure {
        svg: c.finish(),
        csv: table(&["method", "transitions", "mean", "stderr", "runs"], rows)?,
    })
}

pub fn sensitivity_line(points: &[SensitivityPoint], axis: &str) -> anyhow::Result<Figure> {
    if points.is_empty() {
        return Err(config_error("no sensitivity points"));
    }
    let xr = extent(points.iter().map(|q| q.x)).unwrap_or((0.0, 1.0));
    let yr = extent(points.iter().flat_map(|q| [q.mean - q.stderr, q.mean + q.stderr])).unwrap_or((0.0, 1.0));
    let mut c = Canvas::new(480.0, 380.0);
    let mut p = c.panel(70.0, TOP, 380.0, 280.0, xr, yr);
    p.title(&format!("sensitivity to {axis}"));
    p.axes(axis, "objective", true, true);
    let xs: Vec<f64> = points.iter().map(|q| q.x).collect();
    let lo: Vec<f64> = points.iter().map(|q| q.mean - q.stderr).collect();
    let hi: Vec<f64> = points.iter().map(|q| q.mean + q.stderr).collect();
    p.band(&xs, &lo, &hi, color(0));
    p.line(&points.iter().map(|q| (q.x, q.mean)).collect::<Vec<_>>(), color(0));
    let rows = points
        .iter()
        .map(|q| vec![num(q.x), num(q.mean), num(q.stderr), q.seeds.to_string()])
        .collect();
    Ok(Figure {
        svg: c.finish(),
        csv: table(&[axis, "mean", "stderr", "seeds"], rows)?,
    })
}

pub fn sensitivity_surface(s: &Surface) -> anyhow::Result<Figure> {
    if s.xs.is_empty() || s.ys.is_empty() {
        return Err(config_error("empty sensitivity surface"));
    }
    let (nx, ny) = (s.xs.len() as f64, s.ys.len() as f64);
    let values = s.values.iter().flatten().flatten().cloned();
    let (lo, hi) = values.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let cell = 36.0;
    let mut c = Canvas::new(90.0 + nx * cell + 120.0, TOP + ny * cell + 60.0);
    let mut p = c.panel(90.0, TOP, nx * cell, ny * cell, (-0.5, nx - 0.5), (-0.5, ny - 0.5));
    p.title("objective surface (blank: diverged or missing)");
    p.axes(&s.x_axis, &s.y_axis, false, false);
    p.x_labels(&s.xs.iter().enumerate().map(|(i, x)| (i as f64, x.to_string())).collect::<Vec<_>>());
    p.y_labels(&s.ys.iter().enumerate().map(|(j, y)| (j as f64, y.to_string())).collect::<Vec<_>>());
    let mut rows = Vec::new();
    for (j, y) in s.ys.iter().enumerate() {
        for (i, x) in s.xs.iter().enumerate() {
            let v = s.values[j][i];
            if let Some(v) = v {
                let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
                p.rect(i as f64 - 0.5, j as f64 - 0.5, i as f64 + 0.5, j as f64 + 0.5, &heat(t));
            }
            rows.push(vec![num(*x), num(*y), v.map(num).unwrap_or_default()]);
        }
    }
    if lo.is_finite() {
        let legend = [(format!("{lo:.3}"), heat(0.0)), (format!("{hi:.3}"), heat(1.0))];
        let items: Vec<(String, &str)> = legend.iter().map(|(s, c)| (s.clone(), c.as_str())).collect();
        c.legend(90.0 + nx * cell + 15.0, TOP + 10.0, &items);
    }
    Ok(Figure {
        svg: c.finish(),
        csv: table(&[&s.x_axis, &s.y_axis, "value"], rows)?,
    })
}

fn read_report(path: &Path) -> anyhow::Result<MetricsReport> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim().is_empty() {
        return Err(config_error(format!("{} is empty", path.display())));
    }
    serde_json::from_str(&text).with_context(|| format!("parsing metrics report {}", path.display()))
}

fn read_sweep(path: &Path, normalization: Option<&Path>) -> anyhow::Result<(SweepResult, String, Option<NormalizationTable>)> {
    if !path.exists() {
        bail!("{} does not exist", path.display());
    }
    let (result, _) = SweepResult::read(path)?;
    if result.trials.is_empty() {
        return Err(config_error(format!("{} has no completed trials", path.display())));
    }
    let task = result.seeds.first().map(|s| s.summary.task.clone()).unwrap_or_default();
    let table = match normalization {
        Some(p) => Some(NormalizationTable::read_csv(File::open(p)?).map_err(config_error)?),
        None => None,
    };
    Ok((result, task, table))
}

pub fn render(args: &PlotArgs) -> anyhow::Result<Figure> {
    match args.kind {
        PlotKind::Aggregates => aggregates(&read_report(&args.input)?),
        PlotKind::Poi => poi(&read_report(&args.input)?),
        PlotKind::Profile => profile(&read_report(&args.input)?),
        PlotKind::Efficiency => efficiency(&read_report(&args.input)?),
        PlotKind::Sensitivity1d => {
            let (r, task, t) = read_sweep(&args.input, args.normalization.as_deref())?;
            sensitivity_line(&sensitivity_1d(&r, &args.x_axis, &task, t.as_ref())?, &args.x_axis)
        }
        PlotKind::Sensitivity2d => {
            let (r, task, t) = read_sweep(&args.input, args.normalization.as_deref())?;
            sensitivity_surface(&sensitivity_2d(&r, &args.x_axis, &args.y_axis, &task, t.as_ref())?)
        }
    }
}

pub fn run(args: &PlotArgs) -> anyhow::Result<i32> {
    let fig = render(args)?;
    fs::create_dir_all(&args.out)?;
    let stem = args.kind.file_stem();
    write_atomic(&args.out.join(format!("{stem}.svg")), fig.svg.as_bytes())?;
    write_atomic(&args.out.join(format!("{stem}.csv")), fig.csv.as_bytes())?;
    println!("{}", args.out.join(format!("{stem}.svg")).display());
    Ok(EXIT_OK)
}
