use std::fs;
use std::process::Command;

use stochhom_cli::{
    list_experiments, load_config, merged_config, run_experiment, validate_config, CliError,
    Config, RunOptions,
};

const MINIMAL_P2: &str = "\
[problem]
variant = stiff-source
T = 0.25
eps = 1/8
kappa0 = 0.5
initial = sin

[flux]
f1 = linear

[oscillation]
potential = sin

[grid]
n = 64
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stochhom"))
}

#[test]
fn minimal_linear_config_validates() {
    let cfg = Config::parse_ini(MINIMAL_P2).unwrap();
    let setup = validate_config(&cfg).unwrap();
    assert!(setup.report.passed());
    assert_eq!(setup.n, 64);
}

#[test]
fn cubic_without_delta0_is_rejected() {
    let cfg = Config::parse_ini(&MINIMAL_P2.replace("f1 = linear", "f1 = cubic")).unwrap();
    match validate_config(&cfg) {
        Err(e @ CliError::Validation(_)) => {
            assert!(e.to_string().contains("delta0"), "{e}");
            assert_eq!(e.exit_code(), 2);
        }
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn duplicate_key_names_both_lines() {
    let err = Config::parse_ini("[grid]\nn = 64\ndim = 1\nn = 128\n").unwrap_err();
    let msg = err.to_string();
    assert!(
        msg.contains("line 2") || msg.contains("lines 2 and 4"),
        "{msg}"
    );
    assert!(msg.contains('4'), "{msg}");
}

#[test]
fn unknown_key_is_a_parse_error() {
    let err = Config::parse_ini("[grid]\nsize = 3\n").unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("size"));
}

#[test]
fn registry_is_sorted_and_complete() {
    let names: Vec<_> = list_experiments().into_iter().map(|(n, _)| n).collect();
    assert_eq!(names.len(), 12);
    assert!(names.contains(&"eps-sweep-p2"));
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
}

#[test]
fn unknown_experiment_lists_valid_names() {
    let err = merged_config("nope", &Config::default(), &RunOptions::default()).unwrap_err();
    let msg = err.to_string();
    assert!(
        msg.contains("nope") && msg.contains("eps-sweep-p2") && msg.contains("kruzkov"),
        "{msg}"
    );
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn seed_override_keeps_the_count() {
    let opts = RunOptions {
        seed: Some(10),
        paths: Some(4),
        threads: None,
    };
    let cfg = merged_config("special-invariance-p1", &Config::default(), &opts).unwrap();
    assert_eq!(
        cfg.u64_list("sweep", "seeds", &[]).unwrap(),
        vec![10, 11, 12]
    );
    assert_eq!(cfg.usize("sweep", "paths", 0).unwrap(), 4);
}

#[test]
fn kinetic_run_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "kinetic-identities", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let run = dir.path().join("kinetic-identities");
    for f in [
        "residuals.csv",
        "rigidity.csv",
        "config.ini",
        "assertions.csv",
        "manifest.json",
    ] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ini");
    fs::write(&bad, "[grid]\nn = 1\nn = 2\n").unwrap();
    let code = |args: &[&str]| {
        bin()
            .args(args)
            .env("STOCHHOM_OUT", dir.path())
            .output()
            .unwrap()
            .status
            .code()
    };
    assert_eq!(code(&["run", "nope"]), Some(2));
    assert_eq!(
        code(&["validate", "--config", bad.to_str().unwrap()]),
        Some(2)
    );
    assert_eq!(code(&["list"]), Some(0));

    // too coarse a minimum level: the CFL limit adds steps and the step
    // count assertion fails
    let coarse = dir.path().join("coarse.ini");
    fs::write(
        &coarse,
        "[grid]\nn = 64\n\n[scheme]\nmin_level = 1\n\n[sweep]\nseeds = 1\n",
    )
    .unwrap();
    assert_eq!(
        code(&[
            "run",
            "special-invariance-p1",
            "--config",
            coarse.to_str().unwrap()
        ]),
        Some(1)
    );
}

#[test]
fn rerun_from_manifest_reproduces_hashes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let user = Config::parse_ini("[grid]\nn = 128\n").unwrap();
    let first = run_experiment(
        "special-invariance-p1",
        &user,
        &RunOptions::default(),
        a.path(),
    )
    .unwrap();
    assert!(first.passed);
    let echo = load_config(&a.path().join("special-invariance-p1/manifest.json")).unwrap();
    let opts = RunOptions {
        threads: Some(2),
        ..RunOptions::default()
    };
    let second = run_experiment("special-invariance-p1", &echo, &opts, b.path()).unwrap();
    assert_eq!(first.hashes(), second.hashes());
    assert_eq!(first.config, second.config);
}

#[test]
fn json_config_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    fs::write(
        &path,
        r#"{"problem": {"variant": "stiff-source", "T": 0.25, "eps": "1/8", "initial": "sin"},
            "flux": {"f1": "linear"}, "oscillation": {"potential": "sin"}, "grid": {"n": 64}}"#,
    )
    .unwrap();
    let cfg = load_config(&path).unwrap();
    assert!(validate_config(&cfg).is_ok());
}
