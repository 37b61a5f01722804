use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use outer_ppo::driver::RunSummary;
use outer_ppo::metrics::probability_of_improvement_point;
use outer_ppo::sweep::{SweepResult, TrialRecord, TrialStatus};
use outer_ppo_cli::metrics::{compute, MetricsOptions, MetricsReport};
use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_outer-ppo")).args(args).output().unwrap()
}

fn small_train(out: &Path, extra: &[&str]) -> Output {
    let out = out.to_str().unwrap();
    let mut args = vec![
        "train", "--env", "chain-mdp", "--budget", "4096", "--envs", "4", "--out", out, "-q",
        "--set", "ppo.rollout_len=64", "--set", "num_intermediate_evals=4",
        "--set", "eval_episodes_intermediate=4", "--set", "absolute_eval_episodes=8",
    ];
    args.extend_from_slice(extra);
    bin(&args)
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{}: {e}", dir.join(name).display()))
}

#[test]
fn train_writes_every_artifact() {
    let d = tempfile::tempdir().unwrap();
    let o = small_train(d.path(), &["--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["resolved-config.json", "events.jsonl", "outer.jsonl", "summary.json", "best.ckpt", "final.ckpt"] {
        assert!(d.path().join(f).exists(), "{f}");
    }
    let s: RunSummary = serde_json::from_slice(&read(d.path(), "summary.json")).unwrap();
    assert_eq!(s.seed, 7);
    assert!(s.completed);
    let events = String::from_utf8(read(d.path(), "events.jsonl")).unwrap();
    assert!(events.lines().all(|l| !l.contains("\"event\":\"outer\"")));
    assert_eq!(
        String::from_utf8(read(d.path(), "outer.jsonl")).unwrap().lines().count() as u64,
        s.iterations
    );
}

#[test]
fn outer_lr_one_reproduces_standard_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(small_train(a.path(), &["--outer", "lr", "--sigma", "1.0", "--seed", "7"]).status.code(), Some(0));
    assert_eq!(small_train(b.path(), &["--outer", "standard", "--seed", "7"]).status.code(), Some(0));
    for f in ["events.jsonl", "summary.json", "best.ckpt"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
}

#[test]
fn resolved_config_replays_bit_exactly() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(small_train(a.path(), &["--outer", "nesterov", "--sigma", "0.8", "--mu", "0.4"]).status.code(), Some(0));
    let cfg = a.path().join("resolved-config.json");
    let o = bin(&["train", "--config", cfg.to_str().unwrap(), "--out", b.path().to_str().unwrap(), "-q"]);
    assert_eq!(o.status.code(), Some(0));
    for f in ["resolved-config.json", "events.jsonl", "outer.jsonl", "summary.json", "best.ckpt", "final.ckpt"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
}

#[test]
fn interrupted_training_resumes_to_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(small_train(a.path(), &[]).status.code(), Some(0));
    let o = small_train(b.path(), &["--checkpoint-every", "2", "--stop-at", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let bp = b.path();
    assert!(!bp.join("summary.json").exists());
    // Trailing output a killed process could have left behind.
    let mut events = read(bp, "events.jsonl");
    events.extend_from_slice(b"{\"event\":\"iteration\",\"iter");
    fs::write(bp.join("events.jsonl"), events).unwrap();
    let o = bin(&["train", "--resume", "--out", bp.to_str().unwrap(), "-q"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["events.jsonl", "outer.jsonl", "summary.json", "best.ckpt", "final.ckpt"] {
        assert_eq!(read(a.path(), f), read(bp, f), "{f}");
    }
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let o = small_train(d.path(), &["--outer", "lr", "--sigma", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!d.path().join("events.jsonl").exists(), "no work before config errors");
    assert_eq!(small_train(d.path(), &["--set", "ppo.no_such_field=1"]).status.code(), Some(2));
    assert_eq!(bin(&["train", "--env", "nope"]).status.code(), Some(2));
    let o = small_train(d.path(), &["--outer", "lr", "--sigma", "1e308"]);
    assert_eq!(o.status.code(), Some(3));
    let s: RunSummary = serde_json::from_slice(&read(d.path(), "summary.json")).unwrap();
    assert!(s.nan_aborted && s.score.is_none());
    assert_eq!(bin(&["eval", "--checkpoint", "/nonexistent", "--env", "chain-mdp"]).status.code(), Some(1));
}

#[test]
fn eval_reads_policy_and_trainer_checkpoints() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(small_train(d.path(), &[]).status.code(), Some(0));
    let cfg = d.path().join("resolved-config.json");
    for ck in ["best.ckpt", "final.ckpt"] {
        let o = bin(&[
            "eval", "--checkpoint", d.path().join(ck).to_str().unwrap(), "--config", cfg.to_str().unwrap(),
            "--episodes", "5",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let v: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["returns"].as_array().unwrap().len(), 5);
    }
}

#[test]
fn presets_command() {
    let o = bin(&["presets", "ant-baseline"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["value"]["ppo"]["actor_lr"], 3.0e-4);
    assert_eq!(v["value"]["ppo"]["clip_eps"], 0.21);
    let o = bin(&["presets", "outer-lr-grid"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let values = v["value"]["axes"][0]["values"].as_array().unwrap();
    assert_eq!(values.len(), 40);
    assert_eq!(values[0], 0.1);
    assert_eq!(values[39], 4.0);
    let o = bin(&["presets", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cartpole-desk"));
    let listed = String::from_utf8(bin(&["presets"]).stdout).unwrap();
    assert!(listed.lines().any(|l| l == "snake-outer"));
}

fn summary(method: &str, task: &str, score: f64) -> RunSummary {
    RunSummary {
        method: method.into(),
        task: task.into(),
        seed: 0,
        score: Some(score),
        completed: true,
        nan_aborted: false,
        iterations: 2,
        best_eval_mean: Some(score),
        final_eval_mean: Some(score),
        curve: vec![(0, 0.0), (100, score)],
    }
}

fn fixture_runs() -> Vec<RunSummary> {
    let mut runs = Vec::new();
    for (k, task) in ["Hopper", "Ant"].iter().enumerate() {
        for s in 0..4 {
            runs.push(summary("base", task, 1000.0 * (k + 1) as f64 + 100.0 * s as f64));
            runs.push(summary("outer", task, 1050.0 * (k + 1) as f64 + 100.0 * s as f64));
        }
    }
    runs
}

#[test]
fn metrics_and_plots_end_to_end() {
    let d = tempfile::tempdir().unwrap();
    let scores = d.path().join("scores.jsonl");
    let text: String = fixture_runs().iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
    fs::write(&scores, text).unwrap();
    let metrics = d.path().join("metrics.json");
    let o = bin(&[
        "metrics", scores.to_str().unwrap(), "--normalization", "reference", "--baseline", "base",
        "--replicates", "200", "--out", metrics.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: MetricsReport = serde_json::from_slice(&fs::read(&metrics).unwrap()).unwrap();
    assert_eq!(report.poi.len(), 1);
    assert!(report.poi[0].poi.estimate > 0.5);

    let plots = d.path().join("plots");
    for kind in ["aggregates", "poi", "profile", "efficiency"] {
        let o = bin(&["plot", kind, "--input", metrics.to_str().unwrap(), "--out", plots.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{kind}: {}", String::from_utf8_lossy(&o.stderr));
        let svg = fs::read_to_string(plots.join(format!("{kind}.svg"))).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
    // The sidecar carries the same numbers as the report.
    let mut rdr = csv::Reader::from_path(plots.join("aggregates.csv")).unwrap();
    for row in rdr.records() {
        let row = row.unwrap();
        let m = &report.methods[&row[0]].aggregates;
        let i = match &row[1] {
            "median" => m.median,
            "iqm" => m.iqm,
            "mean" => m.mean,
            _ => m.optimality_gap,
        };
        assert_eq!(row[2].parse::<f64>().unwrap(), i.estimate);
        assert_eq!(row[3].parse::<f64>().unwrap(), i.lower);
        assert_eq!(row[4].parse::<f64>().unwrap(), i.upper);
    }

    let empty = d.path().join("empty.json");
    fs::write(&empty, "").unwrap();
    let o = bin(&["plot", "profile", "--input", empty.to_str().unwrap(), "--out", plots.to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty"));
}

#[test]
fn identical_methods_have_even_odds() {
    let mut runs = fixture_runs();
    runs.retain(|r| r.method == "base");
    let mut copy = runs.clone();
    for r in &mut copy {
        r.method = "copy".into();
    }
    runs.extend(copy);
    let report = compute(
        &runs,
        &MetricsOptions {
            normalization: "local",
            baseline: Some("base"),
            replicates: 100,
            confidence: 0.95,
            seed: 0,
            profile_points: 11,
        },
    )
    .unwrap();
    assert_eq!(report.poi[0].poi.estimate, 0.5);
    let m = outer_ppo::metrics::ScoreMatrix::from_summaries(&runs);
    assert_eq!(probability_of_improvement_point(&m["base"], &m["copy"]).unwrap(), 0.5);
}

#[test]
fn sensitivity_surface_leaves_nan_cells_blank() {
    let d = tempfile::tempdir().unwrap();
    let results = d.path().join("sweep.jsonl");
    let rec = |trial: u64, sigma: f64, mu: f64, obj: Option<f64>| TrialRecord {
        trial,
        assignment: vec![("outer.sigma".into(), sigma.into()), ("outer.mu".into(), mu.into())],
        objective: obj,
        status: if obj.is_some() { TrialStatus::Done } else { TrialStatus::Nan },
        seed_objectives: vec![obj],
    };
    let trials = vec![
        rec(0, 0.5, 0.1, Some(1.0)),
        rec(1, 1.0, 0.1, None),
        rec(2, 0.5, 0.2, Some(2.0)),
        rec(3, 1.0, 0.2, Some(3.0)),
    ];
    let text: String = trials
        .iter()
        .map(|t| serde_json::to_string(&outer_ppo::sweep::SweepRecord::Trial(t.clone())).unwrap() + "\n")
        .collect();
    fs::write(&results, text).unwrap();
    assert_eq!(SweepResult::read(&results).unwrap().0.trials.len(), 4);
    let plots = d.path().join("p");
    let o = bin(&["plot", "sensitivity-2d", "--input", results.to_str().unwrap(), "--out", plots.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(plots.join("sensitivity-2d.csv")).unwrap();
    assert_eq!(csv, "outer.sigma,outer.mu,value\n0.5,0.1,1\n1,0.1,\n0.5,0.2,2\n1,0.2,3\n");
    let svg = fs::read_to_string(plots.join("sensitivity-2d.svg")).unwrap();
    // Three coloured cells plus background, frame and two legend swatches.
    assert_eq!(svg.matches("<rect").count(), 3 + 1 + 1 + 2);

    let o = bin(&["plot", "sensitivity-1d", "--input", results.to_str().unwrap(), "--out", plots.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(plots.join("sensitivity-1d.csv")).unwrap();
    assert_eq!(csv.lines().nth(2).unwrap(), "1,,,1");
}

#[test]
fn sweep_run_and_export() {
    let d = tempfile::tempdir().unwrap();
    let results = d.path().join("s.jsonl");
    let r = results.to_str().unwrap();
    let sets = [
        "--set", "base.total_transitions=2048", "--set", "base.num_intermediate_evals=2",
        "--set", "base.eval_episodes_intermediate=2", "--set", "base.absolute_eval_episodes=2",
        "--set", "seeds_per_trial=1", "--set", "axes.0.values=[0.5,1.0]",
    ];
    let mut args = vec!["sweep", "run", "--preset", "outer-lr-grid", "--results", r, "-q"];
    args.extend_from_slice(&sets);
    let o = bin(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = bin(&["sweep", "export", "--results", r, "--format", "csv"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("trial,outer.sigma,objective,status"));

    let mut bad = vec!["sweep", "run", "--preset", "outer-lr-grid", "--results", r, "--set", "base.ppo.clip_eps=-1"];
    bad.push("-q");
    assert_eq!(bin(&bad).status.code(), Some(2));
}
