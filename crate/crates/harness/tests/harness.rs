use std::fs;
use std::path::Path;
use std::process::Command;

use bandit_lab::config::{Algorithm, AttackConfig, ExperimentConfig, Setting, SweepAxes};
use bandit_lab::output::{read_csv, CSV_HEADER};
use bandit_lab::runner::{execute_run, point_dir, run_experiment};
use bandit_lab::summary::{mean_se, SUMMARY_HEADER};

fn small(output: &Path) -> ExperimentConfig {
    ExperimentConfig {
        horizon: 5000,
        m: 20,
        seeds: vec![0, 1, 2],
        attack: AttackConfig { kind: "threshold-bias".into(), ..Default::default() },
        output: output.to_path_buf(),
        ..Default::default()
    }
}

#[test]
fn test_empty_sweep_runs_each_seed_once() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let out = run_experiment(&cfg, 1).unwrap();
    assert_eq!(out.len(), cfg.seeds.len());
    let files: Vec<_> = fs::read_dir(point_dir(dir.path(), 20, 0.1)).unwrap().collect();
    // one CSV and one manifest per seed, plus the summary
    assert_eq!(files.len(), 2 * cfg.seeds.len() + 1);
}

#[test]
fn test_csv_schema_and_group_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let out = run_experiment(&cfg, 1).unwrap();
    let text = fs::read_to_string(&out[0].csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    let table = read_csv(&out[0].csv).unwrap();
    let n_good = (20 - 2) as f64;
    let mean = table.column("regret_per_agent_mean").unwrap();
    let max = table.column("regret_per_agent_max").unwrap();
    let group = table.column("group_regret").unwrap();
    let t = table.column("t").unwrap();
    assert_eq!(t.last().copied(), Some(5000.0));
    assert_eq!(mean, max);
    for (g, m) in group.iter().zip(&mean) {
        // both columns are rounded to nine significant digits
        assert!((g - n_good * m).abs() <= 1e-8 * g.abs().max(1.0), "{g} vs {n_good}·{m}");
    }
    for line in text.lines().skip(1) {
        for field in line.split(',') {
            let digits = field.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
            assert!(digits <= 10, "{field}");
        }
    }
}

#[test]
fn test_summary_matches_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { sweep: SweepAxes { m: Some(vec![20, 40]), alpha: None }, ..small(dir.path()) };
    let out = run_experiment(&cfg, 2).unwrap();
    assert_eq!(out.len(), 6);
    let fin = read_csv(&dir.path().join("final.csv")).unwrap();
    for (row, m) in fin.rows.iter().zip([20usize, 40]) {
        let dir_m = point_dir(dir.path(), m, 0.1);
        let finals: Vec<f64> = cfg
            .seeds
            .iter()
            .map(|s| *read_csv(&dir_m.join(format!("run_seed{s}.csv"))).unwrap().column("regret_per_agent_mean").unwrap().last().unwrap())
            .collect();
        let (mean, se) = mean_se(&finals);
        assert_eq!(row[0], m as f64);
        assert_eq!(row[2], 3.0);
        assert_eq!(row[3], 0.0);
        assert!((row[4] - mean).abs() <= 1e-8 * mean, "{} vs {mean}", row[4]);
        assert!((row[5] - se).abs() <= 1e-8 * se.max(1.0));

        let summary_text = fs::read_to_string(dir_m.join("summary.csv")).unwrap();
        assert_eq!(summary_text.lines().next().unwrap(), SUMMARY_HEADER);
        let summary = read_csv(&dir_m.join("summary.csv")).unwrap();
        let runs: Vec<Vec<f64>> = cfg
            .seeds
            .iter()
            .map(|s| read_csv(&dir_m.join(format!("run_seed{s}.csv"))).unwrap().column("regret_per_agent_mean").unwrap())
            .collect();
        let means = summary.column("regret_mean").unwrap();
        let ses = summary.column("regret_se").unwrap();
        for i in 0..means.len() {
            let col: Vec<f64> = runs.iter().map(|r| r[i]).collect();
            let (m_i, s_i) = mean_se(&col);
            assert!((means[i] - m_i).abs() <= 1e-8 * m_i.max(1.0));
            assert!((ses[i] - s_i).abs() <= 1e-8 * s_i.max(1.0));
        }
    }
}

#[test]
fn test_failed_run_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    // the reweighting estimator is undefined above α ≈ 0.276
    let cfg = ExperimentConfig {
        algorithm: Algorithm::ItwEstimates,
        sweep: SweepAxes { m: None, alpha: Some(vec![0.1, 0.3]) },
        seeds: vec![0],
        ..small(dir.path())
    };
    let out = run_experiment(&cfg, 1).unwrap();
    assert!(out[0].error.is_none());
    assert!(out[1].error.is_some());
    let manifest = fs::read_to_string(&out[1].manifest).unwrap();
    assert!(manifest.contains("status = \"failed"));
    let fin = read_csv(&dir.path().join("final.csv")).unwrap();
    assert_eq!(fin.rows[1][3], 1.0);
}

#[test]
fn test_manifest_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(&dir.path().join("first"));
    let out = run_experiment(&cfg, 1).unwrap();
    for o in &out {
        let mut again = ExperimentConfig::load(&o.manifest).unwrap();
        again.output = dir.path().join("second");
        let rerun = execute_run(&again);
        assert_eq!(fs::read(&o.csv).unwrap(), fs::read(&rerun.csv).unwrap());
    }
}

#[test]
fn test_contextual_and_glm_settings_run() {
    let dir = tempfile::tempdir().unwrap();
    for (setting, algorithm, attack) in [
        (Setting::Contextual, Algorithm::Suplinucb, "contextual-threshold"),
        (Setting::Contextual, Algorithm::SuplinucbNonrobust, "contextual-threshold"),
        (Setting::Glm, Algorithm::Rcglm, "threshold-bias"),
    ] {
        let cfg = ExperimentConfig {
            setting,
            algorithm,
            horizon: 2000,
            k: 10,
            seeds: vec![3],
            attack: AttackConfig { kind: attack.into(), ..Default::default() },
            output: dir.path().join(algorithm.name()),
            ..small(dir.path())
        };
        let out = run_experiment(&cfg, 1).unwrap();
        assert!(out[0].error.is_none(), "{:?}", out[0].error);
        let bound = read_csv(&out[0].csv).unwrap().column("bound_primary").unwrap();
        let expect = if setting == Setting::Contextual { 17.0 } else { 40.0 } * (0.1 + (1.0f64 / 20.0).sqrt()) * (5.0f64 * 2000.0).sqrt();
        assert!((bound.last().unwrap() - expect).abs() < 1e-5 * expect);
    }
}

#[test]
fn test_cli_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_bandit-lab");
    let cfg_path = dir.path().join("exp.toml");
    fs::write(&cfg_path, "horizon = 3000\nm = 20\nseeds = [0, 1]\n").unwrap();
    let status = Command::new(bin)
        .args(["sweep", "--config"])
        .arg(&cfg_path)
        .args(["--sweep-m", "20,40", "--attack", "threshold-bias", "--threads", "2", "--output"])
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert!(status.success());
    let fin = read_csv(&dir.path().join("out/final.csv")).unwrap();
    assert_eq!(fin.rows.len(), 2);

    let single = Command::new(bin).args(["run-linear", "--sweep-m", "20,40", "--output"]).arg(dir.path()).output().unwrap();
    assert!(!single.status.success());

    let curves = Command::new(bin).args(["curves", "--name", "f2", "--t-grid", "0,10000"]).output().unwrap();
    assert_eq!(String::from_utf8(curves.stdout).unwrap(), "t,f2\n0,0\n10000,1788.85438\n");
    let bad = Command::new(bin).args(["curves", "--name", "zz"]).output().unwrap();
    assert!(!bad.status.success());
}
