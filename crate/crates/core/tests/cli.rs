mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use bias_probe::cli::main_with_args;

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut full = vec!["bias-probe"];
    full.extend_from_slice(args);
    let code = main_with_args(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&[]).0, 1);
    assert_eq!(run(&["generate", "--bogus"]).0, 1);
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["generate", "--out", s(dir.path())]);
    assert_eq!(code, 1, "{err}");
    assert!(err.contains("--experiment"));
    // Sampling experiments need a seed.
    assert_eq!(run(&["generate", "--experiment", "deletion", "--out", s(dir.path())]).0, 1);
    assert_eq!(run(&["generate", "--experiment", "nonsense", "--out", s(dir.path())]).0, 1);
    assert_eq!(run(&["run", "--experiment", "matheq", "--backend", "carrier-pigeon:x"]).0, 1);
    assert_eq!(run(&["generate", "--experiment", "gpt3_anchoring", "--p", "30", "--out", s(dir.path())]).0, 1);
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn missing_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.jsonl");
    let (code, _, err) = run(&[
        "generate", "--experiment", "framing", "--seed", "1", "--corpus", s(&missing), "--out", s(dir.path()),
    ]);
    assert_eq!(code, 2, "{err}");
    let (code, _, err) = run(&["run", "--experiment", "matheq", "--backend", "synthetic:canonical", "--out", s(dir.path())]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("generate"));
    assert_eq!(run(&["report", "--experiment", "matheq", "--out", s(dir.path())]).0, 2);
}

#[test]
fn failure_budget_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(&["generate", "--experiment", "gpt3_framing", "--out", s(&out)]).0, 0);
    // An empty replay store answers nothing, so every request fails.
    let store = dir.path().join("empty.jsonl");
    fs::write(&store, "").unwrap();
    let backend = format!("replay:{}", store.display());
    let (code, _, err) = run(&["run", "--experiment", "gpt3_framing", "--backend", &backend, "--out", s(&out)]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("704 of 704"));

    let out2 = dir.path().join("out2");
    run(&["generate", "--experiment", "gpt3_framing", "--out", s(&out2)]);
    let (code, _, err) = run(&[
        "run", "--experiment", "gpt3_framing", "--backend", &backend, "--out", s(&out2), "--failure-budget", "1.0",
    ]);
    assert_eq!(code, 0, "{err}");
}

#[test]
fn manifests_are_never_silently_replaced() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    let (code, stdout, _) = run(&["generate", "--experiment", "deletion", "--seed", "1", "--out", out]);
    assert_eq!(code, 0);
    assert!(stdout.contains("deletion: 120 probes"));
    assert_eq!(run(&["generate", "--experiment", "deletion", "--seed", "1", "--out", out]).0, 0);
    let (code, _, err) = run(&["generate", "--experiment", "deletion", "--seed", "2", "--out", out]);
    assert_eq!(code, 1);
    assert!(err.contains("different content"));
}

#[test]
fn runs_need_resume_to_reuse_a_store() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    let base = ["--experiment", "gpt3_anchoring", "--backend", "synthetic:canonical", "--out", out];
    assert_eq!(run(&[&["generate"][..], &base].concat()).0, 0);
    assert_eq!(run(&[&["run"][..], &base].concat()).0, 0);
    let (code, _, err) = run(&[&["run"][..], &base].concat());
    assert_eq!(code, 1);
    assert!(err.contains("--resume"));
    let (code, stdout, _) = run(&[&["run", "--resume"][..], &base].concat());
    assert_eq!(code, 0);
    assert!(stdout.contains("84 reused, 0 requested"), "{stdout}");
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = dir.path().join("probe.toml");
    fs::write(
        &config,
        format!(
            "experiments = [\"deletion\", \"gpt3_framing\"]\nseed = 4\nout = {:?}\nbackends = [\"synthetic:canonical\"]\n",
            out.display().to_string()
        ),
    )
    .unwrap();
    let (code, stdout, err) = run(&["generate", "--config", s(&config)]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("gpt3_framing: 704 probes"));
    assert!(out.join("manifests/deletion.jsonl").exists());
    // The flag wins over the file.
    let (code, _, _) = run(&["generate", "--config", s(&config), "--seed", "5"]);
    assert_eq!(code, 1);

    fs::write(&config, "api_key = \"do-not-store\"\n").unwrap();
    assert_eq!(run(&["generate", "--config", s(&config)]).0, 1);
}

#[test]
fn code_experiments_need_a_sandbox_to_classify() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    let base = ["--experiment", "matheq", "--backend", "synthetic:canonical", "--out", out];
    assert_eq!(run(&[&["generate"][..], &base].concat()).0, 0);
    assert_eq!(run(&[&["run"][..], &base].concat()).0, 0);
    let (code, _, err) = run(&[&["classify"][..], &base].concat());
    assert_eq!(code, 1);
    assert!(err.contains("--sandbox"));
}

#[test]
fn full_pipeline_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let corpus = common::fixture_corpus_path();
    let runner = common::runner_command();
    let (code, stdout, err) = run(&[
        "all",
        "--corpus",
        s(&corpus),
        "--experiment",
        "framing,matheq,gpt3_anchoring",
        "--backend",
        "synthetic:framing-adopter",
        "--seed",
        "3",
        "--out",
        s(out),
        "--sandbox",
        &runner,
        "--parallelism",
        "2",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("framing: 72 probes"));
    for f in ["framing.csv", "framing_long.csv", "matheq.csv", "gpt3_anchoring.csv", "summary.json"] {
        assert!(out.join("reports").join(f).exists(), "{f}");
    }
    assert!(out.join("runs/synthetic-framing-adopter/matheq.jsonl").exists());
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("reports/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 3);
    assert_eq!(summary["cardinalities"]["matheq"], 48);
    assert_eq!(summary["backends"][0], "synthetic:framing-adopter");
    assert_eq!(summary["corpus_sha256"].as_str().unwrap().len(), 64);
    let framing = fs::read_to_string(out.join("reports/framing.csv")).unwrap();
    assert!(framing.contains("synthetic:framing-adopter,assert_false,12,100.0,0.0,0.0,100.0"), "{framing}");
}

#[test]
fn binary_exit_status() {
    let bin = env!("CARGO_BIN_EXE_bias-probe");
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(bin)
        .args(["run", "--experiment", "matheq", "--backend", "synthetic:canonical", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let status = Command::new(bin).arg("generate").status().unwrap();
    assert_eq!(status.code(), Some(1));
}
