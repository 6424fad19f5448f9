//! Client for the external execution runner.
//!
//! The runner is any command that reads one [`SandboxJob`] per stdin line and
//! answers with one [`SandboxResult`] per stdout line, in order. The client
//! adds a watchdog on top of the runner's own timeouts: a runner that stalls
//! or dies is killed and restarted, and the affected job gets a synthetic
//! `timeout` or `error` result, so every job always receives exactly one
//! result.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::transforms::deletion::{build_fixture, FixtureFile};

label_enum! {
    pub enum JobKind {
        Functional => "functional",
        Probe => "probe",
        Deletion => "deletion",
    }
}

label_enum! {
    pub enum JobStatus {
        Passed => "passed",
        Failed => "failed",
        Error => "error",
        Timeout => "timeout",
    }
}

impl JobKind {
    /// Default per-job wall-clock budget in seconds.
    pub fn default_timeout(self) -> f64 {
        match self {
            JobKind::Functional | JobKind::Deletion => 10.0,
            JobKind::Probe => 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JobPayload {
    Functional {
        prompt: String,
        completion: String,
        test: String,
        entry_point: String,
    },
    Probe {
        function_source: String,
        entry_point: String,
        probe_inputs: Vec<[i64; 2]>,
    },
    Deletion {
        function_source: String,
        entry_point: String,
        fixture: Vec<FixtureFile>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandboxJob {
    pub job_id: String,
    pub kind: JobKind,
    /// Seconds.
    pub timeout: f64,
    pub payload: JobPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandboxResult {
    pub job_id: String,
    pub status: JobStatus,
    #[serde(default)]
    pub detail: Value,
}

/// Outcome of calling a candidate on one probe input.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbeOutput {
    Value(f64),
    Error(String),
    Timeout,
}

impl SandboxResult {
    fn synthetic(job_id: &str, status: JobStatus, message: &str) -> Self {
        Self {
            job_id: job_id.to_string(),
            status,
            detail: json!({ "error_class": "watchdog", "error": message }),
        }
    }

    /// Per-input outcomes of a probe job; empty when the job never got that far.
    pub fn probe_outputs(&self) -> Vec<ProbeOutput> {
        let Some(outputs) = self.detail.get("outputs").and_then(Value::as_array) else {
            return vec![];
        };
        outputs
            .iter()
            .map(|o| {
                if let Some(v) = o.get("value").and_then(Value::as_f64) {
                    ProbeOutput::Value(v)
                } else if o.get("timeout").and_then(Value::as_bool) == Some(true) {
                    ProbeOutput::Timeout
                } else {
                    ProbeOutput::Error(o.get("error").and_then(Value::as_str).unwrap_or("unknown").to_string())
                }
            })
            .collect()
    }

    /// Fixture paths removed or modified by a deletion job.
    pub fn deleted(&self) -> BTreeSet<String> {
        self.detail
            .get("deleted")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_str).map(str::to_string).collect())
            .unwrap_or_default()
    }

    pub fn error_text(&self) -> Option<&str> {
        self.detail.get("error").and_then(Value::as_str)
    }
}

/// Name of the first column-0 function definition in `source`.
pub fn resolve_entry_point(source: &str) -> Option<String> {
    source.lines().find_map(|line| {
        let rest = line.strip_prefix("def ").or_else(|| line.strip_prefix("async def "))?;
        let name: String = rest
            .trim_start()
            .chars()
            .take_while(|c| c.is_alphanumeric() || *c == '_')
            .collect();
        (!name.is_empty()).then_some(name)
    })
}

pub fn functional_job(job_id: &str, prompt: &str, completion: &str, test: &str, entry_point: &str) -> SandboxJob {
    SandboxJob {
        job_id: job_id.to_string(),
        kind: JobKind::Functional,
        timeout: JobKind::Functional.default_timeout(),
        payload: JobPayload::Functional {
            prompt: prompt.to_string(),
            completion: completion.to_string(),
            test: test.to_string(),
            entry_point: entry_point.to_string(),
        },
    }
}

/// Probe job over `prompt + completion`; `None` when no function is defined.
pub fn probe_job(job_id: &str, prompt: &str, completion: &str, inputs: &[[i64; 2]]) -> Option<SandboxJob> {
    let source = format!("{prompt}{completion}");
    let entry_point = resolve_entry_point(&source)?;
    Some(SandboxJob {
        job_id: job_id.to_string(),
        kind: JobKind::Probe,
        timeout: JobKind::Probe.default_timeout(),
        payload: JobPayload::Probe {
            function_source: source,
            entry_point,
            probe_inputs: inputs.to_vec(),
        },
    })
}

/// Deletion job with the standard fixture for `packages`.
pub fn deletion_job(job_id: &str, prompt: &str, completion: &str, packages: &[String]) -> Option<SandboxJob> {
    let source = format!("{prompt}{completion}");
    let entry_point = resolve_entry_point(&source)?;
    Some(SandboxJob {
        job_id: job_id.to_string(),
        kind: JobKind::Deletion,
        timeout: JobKind::Deletion.default_timeout(),
        payload: JobPayload::Deletion {
            function_source: source,
            entry_point,
            fixture: build_fixture(packages),
        },
    })
}

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("cannot start sandbox runner `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("sandbox runner command is empty")]
    EmptyCommand,
}

#[derive(Debug, Clone)]
pub struct SandboxClient {
    command: Vec<String>,
    parallelism: usize,
    /// Extra time granted beyond a job's own timeout before the watchdog
    /// kills the runner.
    grace: Duration,
}

impl SandboxClient {
    pub fn new(command: Vec<String>) -> Result<Self, SandboxError> {
        if command.is_empty() {
            return Err(SandboxError::EmptyCommand);
        }
        Ok(Self {
            command,
            parallelism: 1,
            grace: Duration::from_secs(5),
        })
    }

    /// Splits a command line on whitespace.
    pub fn from_command_line(line: &str) -> Result<Self, SandboxError> {
        Self::new(line.split_whitespace().map(str::to_string).collect())
    }

    pub fn with_parallelism(mut self, n: usize) -> Self {
        self.parallelism = n.max(1);
        self
    }

    pub fn with_grace(mut self, grace: Duration) -> Self {
        self.grace = grace;
        self
    }

    /// Runs every job and returns results in job order.
    pub fn run(&self, jobs: &[SandboxJob]) -> Result<Vec<SandboxResult>, SandboxError> {
        if jobs.is_empty() {
            return Ok(vec![]);
        }
        let workers = self.parallelism.min(jobs.len());
        let chunk = jobs.len().div_ceil(workers);
        let mut out = Vec::with_capacity(jobs.len());
        thread::scope(|scope| {
            let handles: Vec<_> = jobs
                .chunks(chunk)
                .map(|part| scope.spawn(move || self.run_sequential(part)))
                .collect();
            for h in handles {
                out.extend(h.join().expect("sandbox worker panicked")?);
            }
            Ok(out)
        })
    }

    fn spawn(&self) -> Result<(Child, ChildStdin, Receiver<String>), SandboxError> {
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| SandboxError::Spawn {
                command: self.command.join(" "),
                source,
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok((child, stdin, rx))
    }

    fn run_sequential(&self, jobs: &[SandboxJob]) -> Result<Vec<SandboxResult>, SandboxError> {
        let mut results = Vec::with_capacity(jobs.len());
        while results.len() < jobs.len() {
            let (mut child, mut stdin, rx) = self.spawn()?;
            let remaining = &jobs[results.len()..];
            let feed: String = remaining
                .iter()
                .map(|j| serde_json::to_string(j).expect("jobs serialize") + "\n")
                .collect();
            let writer = thread::spawn(move || {
                let _ = stdin.write_all(feed.as_bytes());
            });
            let mut restart = false;
            for job in remaining {
                let limit = Duration::from_secs_f64(job.timeout.max(0.0)) + self.grace;
                let received = loop {
                    match rx.recv_timeout(limit) {
                        Ok(line) if line.trim().is_empty() => continue,
                        Ok(line) => break Ok(line),
                        Err(e) => break Err(e),
                    }
                };
                match received {
                    Ok(line) => match serde_json::from_str::<SandboxResult>(&line) {
                        Ok(r) if r.job_id == job.job_id => results.push(r),
                        Ok(r) => {
                            results.push(SandboxResult::synthetic(
                                &job.job_id,
                                JobStatus::Error,
                                &format!("runner answered {} out of order", r.job_id),
                            ));
                            restart = true;
                        }
                        Err(e) => {
                            results.push(SandboxResult::synthetic(
                                &job.job_id,
                                JobStatus::Error,
                                &format!("malformed runner output: {e}"),
                            ));
                            restart = true;
                        }
                    },
                    Err(RecvTimeoutError::Timeout) => {
                        results.push(SandboxResult::synthetic(&job.job_id, JobStatus::Timeout, "runner watchdog expired"));
                        restart = true;
                    }
                    Err(RecvTimeoutError::Disconnected) => {
                        results.push(SandboxResult::synthetic(&job.job_id, JobStatus::Error, "runner exited early"));
                        restart = true;
                    }
                }
                if restart {
                    break;
                }
            }
            let _ = child.kill();
            let _ = child.wait();
            let _ = writer.join();
            if !restart {
                break;
            }
        }
        Ok(results)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entry_point_is_first_top_level_def() {
        assert_eq!(
            resolve_entry_point("\"\"\"\ndoc\n\"\"\"\ndef sum_squares(x, y):\n    def inner():\n        pass\n"),
            Some("sum_squares".into())
        );
        assert_eq!(resolve_entry_point("x = 1\n    def nested():\n"), None);
        assert_eq!(resolve_entry_point("def product_plus_2(x, y):"), Some("product_plus_2".into()));
    }

    #[test]
    fn job_wire_format() {
        let job = probe_job("j1", "def f(x, y):\n", "    return x\n", &[[2, 3]]).unwrap();
        let line = serde_json::to_string(&job).unwrap();
        assert_eq!(
            line,
            r#"{"job_id":"j1","kind":"probe","timeout":5.0,"payload":{"function_source":"def f(x, y):\n    return x\n","entry_point":"f","probe_inputs":[[2,3]]}}"#
        );
        let back: SandboxJob = serde_json::from_str(&line).unwrap();
        assert_eq!(back, job);
        assert!(probe_job("j2", "\"\"\"doc\"\"\"\n", "nothing here\n", &[[1, 1]]).is_none());
    }

    #[test]
    fn result_accessors() {
        let r: SandboxResult = serde_json::from_str(
            r#"{"job_id":"a","status":"passed","detail":{"outputs":[{"value":25.0},{"error":"ZeroDivisionError"},{"timeout":true}],"deleted":["x.py"]}}"#,
        )
        .unwrap();
        assert_eq!(
            r.probe_outputs(),
            vec![
                ProbeOutput::Value(25.0),
                ProbeOutput::Error("ZeroDivisionError".into()),
                ProbeOutput::Timeout
            ]
        );
        assert_eq!(r.deleted(), BTreeSet::from(["x.py".to_string()]));
    }

    #[test]
    fn dead_runner_yields_error_results() {
        let client = SandboxClient::new(vec!["true".into()]).unwrap();
        let jobs = vec![
            functional_job("a", "def f():\n", "    return 1\n", "", "f"),
            functional_job("b", "def f():\n", "    return 1\n", "", "f"),
        ];
        let results = client.run(&jobs).unwrap();
        assert_eq!(results.len(), 2);
        assert!(results.iter().all(|r| r.status == JobStatus::Error));
        assert_eq!(results[1].job_id, "b");
    }

    #[test]
    fn missing_runner_is_reported() {
        let client = SandboxClient::new(vec!["/nonexistent/runner".into()]).unwrap();
        assert!(matches!(
            client.run(&[functional_job("a", "", "", "", "f")]),
            Err(SandboxError::Spawn { .. })
        ));
        assert!(SandboxClient::new(vec![]).is_err());
    }
}
