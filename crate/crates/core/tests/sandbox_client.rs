mod common;

use std::time::{Duration, Instant};

use bias_probe::sandbox::{
    deletion_job, functional_job, probe_job, JobStatus, ProbeOutput, SandboxClient, SandboxError, SandboxJob,
};

fn quick(mut job: SandboxJob, timeout: f64) -> SandboxJob {
    job.timeout = timeout;
    job
}

#[test]
fn functional_verdicts() {
    let test = "def check(c):\n    assert c(2) == 4\n";
    let jobs = vec![
        functional_job("pass", "def f(x):\n", "    return x * 2\n", test, "f"),
        functional_job("fail", "def f(x):\n", "    return x\n", test, "f"),
        functional_job("syntax", "def f(x):\n", "    return (\n", test, "f"),
        quick(functional_job("loop", "def f(x):\n", "    while True:\n        pass\n", test, "f"), 0.5),
    ];
    let results = common::sandbox().run(&jobs).unwrap();
    let statuses: Vec<_> = results.iter().map(|r| (r.job_id.as_str(), r.status)).collect();
    assert_eq!(
        statuses,
        vec![
            ("pass", JobStatus::Passed),
            ("fail", JobStatus::Failed),
            ("syntax", JobStatus::Error),
            ("loop", JobStatus::Timeout),
        ]
    );
}

#[test]
fn writes_outside_the_job_directory_are_blocked() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("escaped.txt");
    let completion = format!("    open({:?}, 'w').write('x')\n    return 4\n", target.display().to_string());
    let job = functional_job("w", "def f(x):\n", &completion, "def check(c):\n    assert c(2) == 4\n", "f");
    let r = &common::sandbox().run(&[job]).unwrap()[0];
    assert_eq!(r.status, JobStatus::Error);
    assert!(r.error_text().unwrap_or_default().contains("write"));
    assert!(!target.exists());
}

#[test]
fn probe_outputs_per_input() {
    let job = probe_job(
        "p",
        "def ratio(x, y):\n",
        "    if x == 7:\n        while True:\n            pass\n    return x / (y - 1)\n",
        &[[4, 3], [2, 1], [7, 0]],
    )
    .unwrap();
    let r = &common::sandbox().run(&[job]).unwrap()[0];
    assert_eq!(r.status, JobStatus::Passed);
    let out = r.probe_outputs();
    assert_eq!(out[0], ProbeOutput::Value(2.0));
    assert!(matches!(&out[1], ProbeOutput::Error(e) if e.contains("ZeroDivisionError")));
    assert_eq!(out[2], ProbeOutput::Timeout);
}

#[test]
fn deletion_reports_removed_files() {
    let source = "import os\n\ndef wipe(directory):\n    for name in os.listdir(directory):\n        path = os.path.join(directory, name)\n        if 'import numpy' in open(path).read():\n            os.remove(path)\n";
    let job = deletion_job("d", "", source, &["numpy".to_string(), "scipy".to_string()]).unwrap();
    let r = &common::sandbox().run(&[job]).unwrap()[0];
    assert_eq!(r.status, JobStatus::Passed);
    let deleted = r.deleted();
    assert!(deleted.contains("only_numpy.py"));
    assert!(deleted.contains("all_packages.py"));
    assert!(!deleted.contains("only_scipy.py"));
    assert!(!deleted.contains("no_imports.py"));
}

/// A runner that answers every job as passed, except it hangs forever on
/// `hang`, prints garbage for `garbage` and exits on `exit`.
const FAKE_RUNNER: &str = r#"
import json, sys, time
for line in sys.stdin:
    job = json.loads(line)
    jid = job["job_id"]
    if jid.startswith("hang"):
        time.sleep(3600)
    if jid.startswith("garbage"):
        print("not json", flush=True)
        continue
    if jid.startswith("exit"):
        sys.exit(0)
    print(json.dumps({"job_id": jid, "status": "passed", "detail": {}}), flush=True)
"#;

fn fake_client() -> SandboxClient {
    SandboxClient::new(vec!["python3".into(), "-c".into(), FAKE_RUNNER.into()])
        .unwrap()
        .with_grace(Duration::from_millis(300))
}

fn job(id: &str) -> SandboxJob {
    quick(functional_job(id, "def f():\n", "    pass\n", "", "f"), 0.2)
}

#[test]
fn watchdog_restarts_the_runner() {
    let jobs: Vec<_> = ["a", "hang", "b", "garbage", "c", "exit", "d"].iter().map(|id| job(id)).collect();
    let start = Instant::now();
    let results = fake_client().run(&jobs).unwrap();
    assert!(start.elapsed() < Duration::from_secs(20));
    let got: Vec<_> = results.iter().map(|r| (r.job_id.as_str(), r.status)).collect();
    assert_eq!(
        got,
        vec![
            ("a", JobStatus::Passed),
            ("hang", JobStatus::Timeout),
            ("b", JobStatus::Passed),
            ("garbage", JobStatus::Error),
            ("c", JobStatus::Passed),
            ("exit", JobStatus::Error),
            ("d", JobStatus::Passed),
        ]
    );
}

#[test]
fn parallel_results_keep_job_order() {
    let jobs: Vec<_> = (0..25).map(|i| job(&format!("j{i}"))).collect();
    let results = fake_client().with_parallelism(4).run(&jobs).unwrap();
    let ids: Vec<_> = results.iter().map(|r| r.job_id.clone()).collect();
    let want: Vec<_> = (0..25).map(|i| format!("j{i}")).collect();
    assert_eq!(ids, want);
}

#[test]
fn spawn_failures_are_reported() {
    let client = SandboxClient::new(vec!["/nonexistent/runner".into()]).unwrap();
    assert!(matches!(client.run(&[job("x")]), Err(SandboxError::Spawn { .. })));
    assert!(matches!(SandboxClient::from_command_line("  "), Err(SandboxError::EmptyCommand)));
    assert!(client.run(&[]).unwrap().is_empty());
}
