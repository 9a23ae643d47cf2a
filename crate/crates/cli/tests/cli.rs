use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_silencer"))
}

fn karate_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn silencer")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_then_perturb_random() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("er.edges");
    let out = run(&["generate", "--model", "er", "--n", "40", "--p", "0.2", "--seed", "3", "--out", s(&g)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(&g).unwrap().lines().count() > 10);

    let noisy = dir.path().join("noisy.edges");
    let out = run(&["perturb", "--kind", "random", "--in", s(&g), "--p", "0.05", "--seed", "1", "--out", s(&noisy)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let prov: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("noisy.edges.json")).unwrap()).unwrap();
    assert_eq!(prov["seed"], 1);
    assert!(prov["removed"].is_array() && prov["added"].is_array());
}

#[test]
fn qattack_keeps_edge_count() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("attacked.edges");
    let input = karate_dir().join("karate.edges");
    let out = run(&[
        "perturb", "--kind", "qattack", "--in", s(&input), "--budget", "0.05",
        "--population", "10", "--generations", "5", "--out", s(&out_path),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let edges = fs::read_to_string(&out_path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .count();
    assert_eq!(edges, 78);
}

#[test]
fn mixed_noise_writes_dense_matrix_that_detect_reads() {
    let dir = tempfile::tempdir().unwrap();
    let mixed = dir.path().join("mixed.csv");
    let input = karate_dir().join("karate.edges");
    let out = run(&["perturb", "--kind", "mixed", "--in", s(&input), "--p", "0.02", "--rank", "4", "--out", s(&mixed)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let labels = dir.path().join("mixed.labels");
    let out = run(&["detect", "--in", s(&mixed), "--method", "danmf", "--layers", "34-16-2", "--out", s(&labels)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&labels).unwrap().lines().count(), 34);
}

#[test]
fn detect_and_evaluate_on_karate() {
    let dir = tempfile::tempdir().unwrap();
    let input = karate_dir().join("karate.edges");
    let pred = dir.path().join("pred.labels");
    let weights = dir.path().join("w.csv");
    let report = dir.path().join("report.json");
    let out = run(&[
        "detect", "--in", s(&input), "--method", "silencer-danmf", "--layers", "34-16-2",
        "--seed", "2", "--weights", s(&weights), "--report", s(&report), "--out", s(&pred),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&weights).unwrap().lines().count(), 2);
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["outer_trace"].as_array().unwrap().len(), 20);

    let truth = karate_dir().join("karate.labels");
    let out = run(&["evaluate", "--pred", s(&pred), "--truth", s(&truth), "--graph", s(&input)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let scores: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["nmi", "ari", "f1", "modularity"] {
        let x = scores[key].as_f64().unwrap();
        assert!(x.is_finite(), "{key} = {x}");
    }
    assert!(scores["nmi"].as_f64().unwrap() > 0.3);
}

#[test]
fn remap_writes_original_ids() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("sparse.edges");
    fs::write(&input, "100 200\n200 300\n100 300\n900 901\n901 902\n900 902\n300 900\n").unwrap();
    let pred = dir.path().join("pred.labels");
    let out = run(&["detect", "--in", s(&input), "--remap", "--method", "nmf", "--layers", "6-2", "--out", s(&pred)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let ids: Vec<String> = fs::read_to_string(&pred)
        .unwrap()
        .lines()
        .map(|l| l.split_whitespace().next().unwrap().to_string())
        .collect();
    assert_eq!(ids, ["100", "200", "300", "900", "901", "902"]);
}

#[test]
fn validation_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = karate_dir().join("karate.edges");
    let out_path = dir.path().join("x");

    // layer sizes disagree with the graph
    let out = run(&["detect", "--in", s(&input), "--method", "danmf", "--layers", "30-2", "--out", s(&out_path)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    // flip probability out of range
    let out = run(&["perturb", "--kind", "random", "--in", s(&input), "--p", "1.5", "--out", s(&out_path)]);
    assert_eq!(code(&out), 2);

    // malformed edge list
    let bad = dir.path().join("bad.edges");
    fs::write(&bad, "0 1\n1 x\n").unwrap();
    let out = run(&["detect", "--in", s(&bad), "--method", "nmf", "--layers", "2-1", "--out", s(&out_path)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2:"));

    // pixel weights requested from a method without them
    let out = run(&[
        "detect", "--in", s(&input), "--method", "nmf", "--layers", "34-2",
        "--weights", s(&dir.path().join("w.csv")), "--out", s(&out_path),
    ]);
    assert_eq!(code(&out), 2);

    // unknown flag
    assert_eq!(code(&run(&["generate", "--bogus"])), 2);
}

#[test]
fn numerical_failure_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let huge = dir.path().join("huge.csv");
    let row = |i: usize| {
        (0..4)
            .map(|j| if i == j { "0".to_string() } else { "1e300".to_string() })
            .collect::<Vec<_>>()
            .join(",")
    };
    fs::write(&huge, (0..4).map(row).collect::<Vec<_>>().join("\n") + "\n").unwrap();
    let out = run(&["detect", "--in", s(&huge), "--method", "nmf", "--layers", "4-2", "--out", s(&dir.path().join("p"))]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn experiment_is_reproducible_and_seed_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.json");
    fs::write(
        &config,
        r#"{
  "dataset": {"type": "named", "name": "karate"},
  "noise": {"kind": "random", "p": 0.02},
  "methods": [
    {"name": "danmf", "layers": [34, 16, 2]},
    {"name": "silencer-danmf", "layers": [34, 16, 2]}
  ],
  "repetitions": 2,
  "base_seed": 5
}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("results");
    let first = run(&["experiment", "--config", s(&config), "--out", s(&out_dir)]);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    assert!(String::from_utf8_lossy(&first.stdout).starts_with("method,metric,mean,std,runs,failed"));
    let a = fs::read(out_dir.join("results.json")).unwrap();
    for f in ["results.csv", "timing.json", "perturbed_0.edges", "perturbed_1.json"] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }

    let second = run(&["experiment", "--config", s(&config), "--out", s(&out_dir)]);
    assert_eq!(code(&second), 0);
    assert_eq!(a, fs::read(out_dir.join("results.json")).unwrap());

    let reseeded = dir.path().join("reseeded");
    let third = run(&["experiment", "--config", s(&config), "--seed", "6", "--out", s(&reseeded)]);
    assert_eq!(code(&third), 0);
    let table: serde_json::Value =
        serde_json::from_slice(&fs::read(reseeded.join("results.json")).unwrap()).unwrap();
    assert_eq!(table["config"]["base_seed"], 6);
}
