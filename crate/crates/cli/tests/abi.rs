//! Command-line contract: flags, exit codes, config merging and run manifests.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bayesgeo(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bayesgeo"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small_fixture(dir: &Path) {
    fs::write(
        dir.join("fx.json"),
        r#"{"n_layers": 3, "n_heads": 2, "d_v": 4, "d_k": 4, "d_model": 16, "n_prompts": 40, "tokens_per_prompt": 8,
            "attention_entropy_schedule": [2.5, 2.0, 1.5]}"#,
    )
    .unwrap();
    let o = bayesgeo(&["synth", "fixture", "--out", "fx", "--fixture-config", "fx.json"], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn oracle_prints_exact_fraction() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bayesgeo(&["sula", "oracle", "--labels", "+"], tmp.path());
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("91/150"));
    let o = bayesgeo(&["sula", "oracle", "--labels", "-", "--json"], tmp.path());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["p_positive_exact"], "59/150");
    assert_eq!(v["n_neg"], 1);
}

#[test]
fn bad_arguments_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&bayesgeo(&["nonsense"], tmp.path())), 2);
    assert_eq!(code(&bayesgeo(&["sula", "oracle", "--labels", "x"], tmp.path())), 2);
    assert_eq!(code(&bayesgeo(&["sula", "gen", "--out", "c", "--condition", "bogus"], tmp.path())), 2);
    fs::write(tmp.path().join("c.json"), "{not json").unwrap();
    assert_eq!(code(&bayesgeo(&["sula", "oracle", "--labels", "+", "--config", "c.json"], tmp.path())), 2);
}

#[test]
fn missing_input_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bayesgeo(&["analyze", "manifold", "--bundle", "absent", "--out", "o"], tmp.path());
    assert_eq!(code(&o), 3);
}

#[test]
fn corrupted_bundle_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    small_fixture(tmp.path());
    assert_eq!(code(&bayesgeo(&["bundle", "validate", "fx"], tmp.path())), 0);
    let values = tmp.path().join("fx/values.bin");
    let mut bytes = fs::read(&values).unwrap();
    bytes[40] ^= 0x01;
    fs::write(&values, bytes).unwrap();
    let o = bayesgeo(&["bundle", "validate", "fx", "--out", "v"], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).to_lowercase().contains("checksum"));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("v/violations.json")).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert_eq!(code(&bayesgeo(&["analyze", "manifold", "--bundle", "fx", "--out", "o"], tmp.path())), 1);
}

#[test]
fn config_file_values_yield_to_flags() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.json"), r#"{"per_k": 2, "seed": 4}"#).unwrap();
    let o = bayesgeo(&["sula", "gen", "--out", "a", "--config", "c.json", "--seed", "9"], tmp.path());
    assert_eq!(code(&o), 0);
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("a/run_manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["seed"], 9);
    assert_eq!(m["config"]["per_k"], 2);
    let lines = fs::read_to_string(tmp.path().join("a/corpus.jsonl")).unwrap().lines().count();
    assert_eq!(lines, 10);
}

#[test]
fn run_manifest_has_no_paths_or_timestamps() {
    let tmp = tempfile::tempdir().unwrap();
    small_fixture(tmp.path());
    let o = bayesgeo(&["analyze", "all", "--bundle", "fx", "--out", "geo", "--resamples", "200"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(tmp.path().join("geo/run_manifest.json")).unwrap();
    assert!(!text.contains(tmp.path().to_str().unwrap()));
    let m: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(m["command"], "analyze all");
    assert_eq!(m["inputs"][0]["name"], "fx");
    assert_eq!(m["config"].get("out"), None);
    let outputs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(outputs.contains(&"geometry_report.json"));
    assert!(outputs.contains(&"attention.csv"));
}

#[test]
fn keys_and_attention_subcommands_write_their_tables() {
    let tmp = tempfile::tempdir().unwrap();
    small_fixture(tmp.path());
    assert_eq!(code(&bayesgeo(&["analyze", "keys", "--bundle", "fx", "--out", "k"], tmp.path())), 0);
    assert!(tmp.path().join("k/orthogonality.csv").exists());
    let o = bayesgeo(&["analyze", "attention", "--bundle", "fx", "--out", "a", "--resamples", "100"], tmp.path());
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(tmp.path().join("a/attention.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn axes_from_another_split_are_refused() {
    let tmp = tempfile::tempdir().unwrap();
    small_fixture(tmp.path());
    let p = tmp.path();
    for args in [
        &["axis", "estimate", "--bundle", "fx", "--out", "axes", "--n-estimation", "20"][..],
        &["spec", "build", "--bundle", "fx", "--axes", "axes", "--layers", "1", "--out", "spec"],
        &["spec", "apply", "--bundle", "fx", "--spec", "spec", "--out", "cut"],
    ] {
        let o = bayesgeo(args, p);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let ok = bayesgeo(
        &["evaluate", "--baseline", "fx", "--intervened", "cut", "--spec", "spec", "--axes", "axes", "--out", "ev", "--resamples", "100"],
        p,
    );
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));

    // a spec estimated on a different split does not match the reference axes
    assert_eq!(code(&bayesgeo(&["axis", "estimate", "--bundle", "fx", "--out", "axes2", "--n-estimation", "30"], p)), 0);
    let o = bayesgeo(
        &["evaluate", "--baseline", "fx", "--intervened", "cut", "--spec", "spec", "--axes", "axes2", "--out", "ev2"],
        p,
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn report_diff_detects_changes() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    for (out, seed) in [("a", "1"), ("b", "1"), ("c", "2")] {
        assert_eq!(code(&bayesgeo(&["sula", "gen", "--out", out, "--per-k", "3", "--seed", seed], p)), 0);
    }
    assert_eq!(code(&bayesgeo(&["report", "--diff", "a", "b"], p)), 0);
    let o = bayesgeo(&["report", "--diff", "a", "c"], p);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("corpus.jsonl"));
}
