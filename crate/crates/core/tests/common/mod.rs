#![allow(dead_code)]

use std::path::PathBuf;

use bias_probe::corpus::{load_problems, CodeProblem};
use bias_probe::sandbox::SandboxClient;

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture_corpus_path() -> PathBuf {
    crate_dir().join("tests/fixtures/problems.jsonl")
}

pub fn fixture_problems() -> Vec<CodeProblem> {
    load_problems(&fixture_corpus_path()).expect("fixture corpus loads")
}

pub fn runner_script() -> PathBuf {
    crate_dir().join("tests/support/sandbox_runner.py")
}

pub fn runner_command() -> String {
    format!("python3 {}", runner_script().display())
}

pub fn sandbox() -> SandboxClient {
    SandboxClient::from_command_line(&runner_command())
        .expect("runner command")
        .with_parallelism(2)
}

/// The public problem file, from `BIAS_PROBE_CORPUS` or `data/` at the
/// workspace root.
pub fn public_corpus_path() -> Option<PathBuf> {
    if let Some(p) = std::env::var_os("BIAS_PROBE_CORPUS") {
        let p = PathBuf::from(p);
        return p.exists().then_some(p);
    }
    let data = crate_dir().join("../../data");
    ["HumanEval.jsonl", "HumanEval.jsonl.gz"]
        .iter()
        .map(|name| data.join(name))
        .find(|p| p.exists())
}
