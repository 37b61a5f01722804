use std::collections::BTreeSet;
use std::io::Write;

use outer_ppo::outer::OuterStrategy;
use outer_ppo::presets::{desk_preset, outer_optima, preset, preset_names, sweep_preset, task_preset, tenths, Preset};
use outer_ppo::sweep::{
    best_trial, export_csv, run_sweep, sensitivity_1d, sensitivity_2d, Axis, Objective, SweepOptions, SweepResult,
    SweepSpec, TrialRecord, TrialStatus,
};
use serde_json::{json, Value};

fn tiny_spec() -> SweepSpec {
    let mut base = desk_preset("chain-desk").unwrap();
    base.ppo.num_envs = 4;
    base.ppo.rollout_len = 16;
    base.ppo.num_minibatches = 2;
    base.ppo.num_epochs = 1;
    base.network.hidden = vec![8];
    base.total_transitions = 128;
    base.num_intermediate_evals = 2;
    base.eval_episodes_intermediate = 2;
    base.absolute_eval_episodes = 2;
    base.outer = OuterStrategy::OuterLr { sigma: 1.0 };
    SweepSpec {
        name: "tiny".into(),
        base,
        axes: vec![Axis {
            path: "outer.sigma".into(),
            values: vec![json!(0.5), json!(1.0), json!(1.5)],
        }],
        random: None,
        seeds_per_trial: 2,
        objective: Objective::FinalEvalMean,
        root_seed: 11,
    }
}

#[test]
fn grid_sizes_and_members() {
    let sizes: Vec<usize> = ["outer-lr-grid", "outer-nesterov-grid", "biased-init-grid"]
        .iter()
        .map(|n| sweep_preset(n).unwrap().trials().unwrap().len())
        .collect();
    assert_eq!(sizes, vec![40, 90, 100]);

    let spec = sweep_preset("outer-nesterov-grid").unwrap();
    let got: BTreeSet<(u64, u64)> = spec
        .trials()
        .unwrap()
        .iter()
        .map(|t| (t.assignment[0].1.as_f64().unwrap().to_bits(), t.assignment[1].1.as_f64().unwrap().to_bits()))
        .collect();
    let mut want = BTreeSet::new();
    for s in 1..=10 {
        for m in 1..=9 {
            want.insert(((s as f64 / 10.0).to_bits(), (m as f64 / 10.0).to_bits()));
        }
    }
    assert_eq!(got, want);
    assert!(spec.baseline_frozen().unwrap());
    assert!(!sweep_preset("baseline-search").unwrap().baseline_frozen().unwrap());
}

#[test]
fn random_search_is_reproducible_and_in_range() {
    let spec = sweep_preset("baseline-search").unwrap();
    let a = spec.trials().unwrap();
    assert_eq!(a, spec.trials().unwrap());
    assert_eq!(a.len(), 64);
    for t in &a {
        let cfg = spec.trial_config(t, 0).unwrap();
        assert!(cfg.ppo.out_of_search_ranges().is_empty(), "{:?}", t.assignment);
    }
}

#[test]
fn trial_seeds_are_distinct() {
    let spec = tiny_spec();
    let seeds: BTreeSet<u64> = (0..3).flat_map(|t| (0..2).map(move |a| (t, a))).map(|(t, a)| spec.seed_for(t, a)).collect();
    assert_eq!(seeds.len(), 6);
}

#[test]
fn resume_after_interruption_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let spec = tiny_spec();

    let full = dir.path().join("full.jsonl");
    let reference = run_sweep(&spec, &full, &SweepOptions { workers: 3, stop_after: None }).unwrap();
    assert_eq!(reference.seeds.len(), 6);
    assert_eq!(reference.trials.len(), 3);

    let part = dir.path().join("part.jsonl");
    run_sweep(&spec, &part, &SweepOptions { workers: 2, stop_after: Some(3) }).unwrap();
    let (mid, _) = SweepResult::read(&part).unwrap();
    assert_eq!(mid.seeds.len(), 3);
    // A half-written line from a killed process.
    std::fs::OpenOptions::new()
        .append(true)
        .open(&part)
        .unwrap()
        .write_all(b"{\"record\":\"seed\",\"trial\":1,\"ag")
        .unwrap();
    let resumed = run_sweep(&spec, &part, &SweepOptions { workers: 1, stop_after: None }).unwrap();

    assert_eq!(std::fs::read(&full).unwrap(), std::fs::read(&part).unwrap());
    assert_eq!(resumed, reference);

    // Nothing left to do: running again leaves the file alone.
    let before = std::fs::read(&full).unwrap();
    run_sweep(&spec, &full, &SweepOptions::default()).unwrap();
    assert_eq!(before, std::fs::read(&full).unwrap());

    let mut csv = Vec::new();
    export_csv(&reference, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("trial,outer.sigma,objective,status\n"));
    assert_eq!(text.lines().count(), 4);
}

fn record(trial: u64, sigma: f64, mu: f64, seeds: Vec<Option<f64>>, nan: bool) -> TrialRecord {
    let done: Vec<f64> = seeds.iter().flatten().cloned().collect();
    TrialRecord {
        trial,
        assignment: vec![("outer.sigma".into(), Value::from(sigma)), ("outer.mu".into(), Value::from(mu))],
        objective: if nan { None } else { Some(done.iter().sum::<f64>() / done.len() as f64) },
        status: if nan { TrialStatus::Nan } else { TrialStatus::Done },
        seed_objectives: seeds,
    }
}

#[test]
fn best_trial_prefers_lowest_id_on_ties() {
    let trials = vec![
        record(0, 0.1, 0.0, vec![Some(1.0)], false),
        record(1, 0.2, 0.0, vec![Some(3.0)], false),
        record(2, 0.3, 0.0, vec![Some(3.0)], false),
        record(3, 0.4, 0.0, vec![None], true),
    ];
    assert_eq!(best_trial(&trials).unwrap().trial, 1);
    assert!(best_trial(&trials[3..]).is_none());
}

#[test]
fn sensitivity_hand_fixture() {
    let result = SweepResult {
        seeds: Vec::new(),
        trials: vec![
            record(0, 0.5, 0.1, vec![Some(1.0), Some(3.0)], false),
            record(1, 1.0, 0.1, vec![Some(4.0), None], true),
            record(2, 0.5, 0.2, vec![Some(5.0), Some(5.0)], false),
            record(3, 1.0, 0.2, vec![Some(6.0), Some(8.0)], false),
        ],
    };
    let s = sensitivity_2d(&result, "outer.sigma", "outer.mu", "t", None).unwrap();
    assert_eq!(s.xs, vec![0.5, 1.0]);
    assert_eq!(s.ys, vec![0.1, 0.2]);
    assert_eq!(s.values, vec![vec![Some(2.0), None], vec![Some(5.0), Some(7.0)]]);

    let line = sensitivity_1d(&result, "outer.sigma", "t", None).unwrap();
    assert_eq!(line.len(), 2);
    assert_eq!(line[0].mean, (1.0 + 3.0 + 5.0 + 5.0) / 4.0);
    assert!(line[1].mean.is_nan());

    let empty = SweepResult::default();
    assert!(sensitivity_1d(&empty, "outer.sigma", "t", None).is_err());
}

#[test]
fn presets_round_trip_byte_identically() {
    for name in preset_names() {
        let p = preset(&name).unwrap();
        let text = p.to_json();
        let back = Preset::from_json(&text).unwrap();
        assert_eq!(back, p, "{name}");
        assert_eq!(back.to_json(), text, "{name}");
    }
}

#[test]
fn published_values_spot_checks() {
    assert_eq!(outer_optima("ant").unwrap().outer_lr, OuterStrategy::OuterLr { sigma: 0.5 });
    assert_eq!(outer_optima("snake").unwrap().outer_lr, OuterStrategy::OuterLr { sigma: 2.3 });
    assert_eq!(
        outer_optima("hopper").unwrap().outer_nesterov,
        OuterStrategy::OuterNesterov { sigma: 0.9, mu: 0.4 }
    );
    let hopper = task_preset("hopper").unwrap().ppo;
    assert_eq!((hopper.num_envs, hopper.rollout_len, hopper.num_minibatches), (64, 64, 64));
    assert_eq!(tenths(1, 3), vec![0.1, 0.2, 0.3]);
}
