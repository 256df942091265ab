use std::fs;
use std::path::Path;
use std::process::Command;

use gevrey_cli::{
    cmd_decay_study, cmd_invariants, cmd_linear_oracle, cmd_simulate, CliError, ExperimentConfig, RunOptions, RunRecord,
};

const TINY: &str = r#"{
    "schema_version": 1,
    "lattice": {"dim": 2, "grid_n": 16},
    "physics": {"nu": 0.05, "horizon": 0.1, "dt": 0.005},
    "ensemble": {"n_paths": 2, "master_seed": 9},
    "outputs": {"snapshot_every": 5}
}"#;

fn with(base: &str, key: &str, block: &str) -> ExperimentConfig {
    let text = base.replacen("\"physics\"", &format!("\"{key}\": {block}, \"physics\""), 1);
    ExperimentConfig::from_json(&text).unwrap()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap()
}

#[test]
fn tiny_simulation_writes_verified_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_json(TINY).unwrap();
    let record = cmd_simulate(&cfg, &RunOptions::new(dir.path())).unwrap();
    assert_eq!(record.command, "simulate");
    assert_eq!(record.paths.len(), 2);
    assert!(record.manifest.iter().any(|e| e.file == "series.csv"));
    assert!(record.manifest.iter().any(|e| e.file == "checkpoints/p0001.snsf"));
    assert!(record.manifest.iter().all(|e| e.file != "run_record.json"));
    let stored = RunRecord::read(dir.path()).unwrap();
    assert_eq!(stored, record);
    assert!(stored.verify(dir.path()).unwrap().is_empty());
    let series = String::from_utf8(read(dir.path(), "series.csv")).unwrap();
    assert!(series.starts_with("path,step,t,energy,enstrophy,h2,budget,h2_int\n"));
    assert_eq!(series.lines().count(), 1 + 2 * 21);

    fs::write(dir.path().join("stops.csv"), "tampered\n").unwrap();
    assert_eq!(stored.verify(dir.path()).unwrap(), vec!["stops.csv".to_string()]);
}

#[test]
fn noise_off_paths_coincide() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with(TINY, "noise", r#"{"g": {"variant": "zero"}, "xi": {"variant": "none"}}"#);
    cmd_simulate(&cfg, &RunOptions::new(dir.path())).unwrap();
    assert_eq!(read(dir.path(), "checkpoints/p0000.snsf"), read(dir.path(), "checkpoints/p0001.snsf"));
    assert_eq!(read(dir.path(), "spectra_p0000.csv"), read(dir.path(), "spectra_p0001.csv"));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let cfg = ExperimentConfig::from_json(TINY).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = cmd_simulate(&cfg, &RunOptions { threads: Some(1), ..RunOptions::new(a.path()) }).unwrap();
    let rb = cmd_simulate(&cfg, &RunOptions { threads: Some(4), ..RunOptions::new(b.path()) }).unwrap();
    assert_eq!(ra.manifest, rb.manifest);
    for e in &ra.manifest {
        assert_eq!(read(a.path(), &e.file), read(b.path(), &e.file), "{}", e.file);
    }
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_json(TINY).unwrap();
    let opts = RunOptions { paths: Some(3), seed: Some(1), ..RunOptions::new(dir.path()) };
    let record = cmd_simulate(&cfg, &opts).unwrap();
    assert_eq!(record.paths.len(), 3);
    assert_ne!(record.config_hash, cfg.hash());
}

#[test]
fn decay_study_with_zero_threshold_stops_at_first_step() {
    let dir = tempfile::tempdir().unwrap();
    let base = TINY.replace("\"grid_n\": 16", "\"grid_n\": 32");
    let cfg = with(&base, "galerkin", r#"{"cutoffs": [2, 3, 4], "reference_cutoff": 8}"#);
    let mut cfg = cfg;
    cfg.monitors.h2_threshold = 0.0;
    let record = cmd_decay_study(&cfg, &RunOptions::new(dir.path())).unwrap();
    for p in &record.paths {
        assert_eq!(p.stops.len(), 3);
        assert!(p.stops.iter().all(|s| s.step == 1));
    }
    let table = String::from_utf8(read(dir.path(), "decay.csv")).unwrap();
    assert!(table.starts_with("N,mean_error,se\n"));
}

#[test]
fn decay_study_needs_three_cutoffs() {
    let dir = tempfile::tempdir().unwrap();
    let base = TINY.replace("\"grid_n\": 16", "\"grid_n\": 32");
    let cfg = with(&base, "galerkin", r#"{"cutoffs": [2, 4], "reference_cutoff": 8}"#);
    let err = cmd_decay_study(&cfg, &RunOptions::new(dir.path())).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

const LINEAR: &str = r#"{
    "schema_version": 1,
    "lattice": {"dim": 2, "grid_n": 16},
    "physics": {"nu": 0.05, "horizon": 0.2, "dt": 0.02, "convection": false},
    "noise": {"g": {"variant": "zero"}, "xi": {"variant": "explicit", "coefficients": [{"kind": "constant", "vector": [0.0, 0.0]}]}},
    "ensemble": {"n_paths": 4},
    "oracle": {"levels": 3}
}"#;

#[test]
fn linear_oracle_is_exact_without_transport() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_json(LINEAR).unwrap();
    let record = cmd_linear_oracle(&cfg, &RunOptions::new(dir.path())).unwrap();
    for e in record.summary["rms_error"].as_array().unwrap() {
        assert!(e.as_f64().unwrap() < 1e-14, "{e}");
    }
}

#[test]
fn linear_oracle_refuses_nonlinear_configs() {
    let dir = tempfile::tempdir().unwrap();
    let on = ExperimentConfig::from_json(&LINEAR.replace("\"convection\": false", "\"convection\": true")).unwrap();
    assert!(matches!(cmd_linear_oracle(&on, &RunOptions::new(dir.path())), Err(CliError::Config(_))));
    let two = ExperimentConfig::from_json(&LINEAR.replace(
        "[{\"kind\": \"constant\", \"vector\": [0.0, 0.0]}]",
        "[{\"kind\": \"constant\", \"vector\": [0.1, 0.0]}, {\"kind\": \"constant\", \"vector\": [0.0, 0.1]}]",
    ))
    .unwrap();
    assert!(matches!(cmd_linear_oracle(&two, &RunOptions::new(dir.path())), Err(CliError::Config(_))));
}

#[test]
fn invariants_pass_on_defaults_and_mark_experimental_noise() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_json(TINY).unwrap();
    let record = cmd_invariants(&cfg, &RunOptions::new(dir.path())).unwrap();
    assert_eq!(record.summary["passed"], true);

    let experimental = with(
        TINY,
        "noise",
        r#"{"g": {"variant": "zero"}, "xi": {"variant": "explicit", "coefficients": [{"kind": "single_mode", "wavevector": [1, 0], "amplitude": 0.2}]}}"#,
    );
    let other = tempfile::tempdir().unwrap();
    cmd_invariants(&experimental, &RunOptions::new(other.path())).unwrap();
    let table = String::from_utf8(read(other.path(), "invariants.csv")).unwrap();
    assert!(table.lines().any(|l| l.starts_with("commutativity_experimental_xi,") && l.ends_with(",info")));
}

#[test]
fn overlapping_noise_indices_fail_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with(
        TINY,
        "noise",
        r#"{"g": {"variant": "additive", "modes": [{"wavevector": [1, 0], "amplitude": 0.5}], "indices": [0]}, "xi": {"variant": "geometric", "k_max": 2, "magnitude": 0.5}}"#,
    );
    let err = cmd_invariants(&cfg, &RunOptions::new(dir.path())).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    let table = String::from_utf8(read(dir.path(), "invariants.csv")).unwrap();
    assert!(table.lines().any(|l| l.starts_with("noise_orthogonality,") && l.ends_with(",fail")));
    assert!(matches!(cmd_simulate(&cfg, &RunOptions::new(dir.path())), Err(CliError::Config(_))));
}

fn binary(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_gevrey-sns")).args(args).output().unwrap().status.code().unwrap()
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    fs::write(&good, TINY).unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, TINY.replace("\"dt\"", "\"dt\": 0.005, \"typo\"")).unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    assert_eq!(binary(&["simulate", "--config", good.to_str().unwrap(), "--out", out, "--threads", "2"]), 0);
    assert!(Path::new(out).join("run_record.json").exists());
    assert_eq!(binary(&["simulate", "--config", bad.to_str().unwrap(), "--out", out]), 2);
    assert_eq!(binary(&["linear-oracle", "--config", good.to_str().unwrap(), "--out", out]), 2);
    assert_eq!(binary(&["invariants", "--config", good.to_str().unwrap(), "--out", out]), 0);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 4);
}
