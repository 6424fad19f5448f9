//! Completion sources behind one interface: a remote HTTP completions API, a
//! replay store, and deterministic synthetic profiles.

mod batch;
mod http;
mod limiter;
mod replay;
mod synthetic;

use std::fmt;
use std::str::FromStr;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transforms::TransformedPrompt;

pub use batch::{read_store, run_batch, BatchOptions, RunError, RunSummary};
pub use http::{HttpBackend, API_KEY_ENV};
pub use limiter::{Clock, RateLimiter, SystemClock};
pub use replay::ReplayBackend;
pub use synthetic::{deletion_function, Profile, SimplifierMode, SyntheticBackend};

/// Stop sequences applied to code probes.
pub const CODE_STOP_SEQUENCES: [&str; 4] = ["\ndef ", "\nclass ", "\nif __name__", "\nprint("];
pub const CODE_MAX_TOKENS: u32 = 300;
pub const TEXT_MAX_TOKENS: u32 = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub probe_id: String,
    pub prompt_text: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop_sequences: Vec<String>,
}

impl CompletionRequest {
    /// Greedy request with the default limits for the probe's experiment.
    ///
    /// Prompts without a top-level `def` ask the model to write the whole
    /// function, so `"\ndef "` is dropped from their stop list.
    pub fn for_probe(probe: &TransformedPrompt) -> Self {
        let (max_tokens, stop_sequences) = if probe.experiment.is_code() {
            let has_def = probe.prompt_text.lines().any(|l| l.starts_with("def ") || l.starts_with("async def "));
            let stops = CODE_STOP_SEQUENCES
                .iter()
                .filter(|s| has_def || **s != "\ndef ")
                .map(|s| s.to_string())
                .collect();
            (CODE_MAX_TOKENS, stops)
        } else {
            (TEXT_MAX_TOKENS, vec![])
        };
        Self {
            probe_id: probe.probe_id.clone(),
            prompt_text: probe.prompt_text.clone(),
            max_tokens,
            temperature: 0.0,
            stop_sequences,
        }
    }
}

/// Cuts `text` at the earliest occurrence of any stop sequence.
pub fn truncate_at_stop<'a>(text: &'a str, stops: &[String]) -> &'a str {
    let cut = stops
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s.as_str()))
        .min()
        .unwrap_or(text.len());
    &text[..cut]
}

label_enum! {
    pub enum ErrorClass {
        Timeout => "timeout",
        RateLimited => "rate_limited",
        Server => "server",
        Auth => "auth",
        Client => "client",
        Transport => "transport",
        MissingFixture => "missing_fixture",
        InvalidResponse => "invalid_response",
    }
}

impl ErrorClass {
    /// Transient failures worth another attempt.
    pub fn is_retryable(self) -> bool {
        matches!(self, ErrorClass::Timeout | ErrorClass::RateLimited | ErrorClass::Server)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{class}: {message}")]
pub struct BackendError {
    pub class: ErrorClass,
    pub message: String,
}

impl BackendError {
    pub fn new(class: ErrorClass, message: impl Into<String>) -> Self {
        Self {
            class,
            message: message.into(),
        }
    }
}

/// One model response bound to its probe. Failed requests keep an empty
/// completion and carry the error class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub probe_id: String,
    pub backend_id: String,
    pub completion_text: String,
    pub latency_ms: u64,
    pub retries: u32,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_detail: Option<String>,
}

impl CompletionRecord {
    pub fn is_failed(&self) -> bool {
        self.error.is_some()
    }

    /// The record with wall-clock fields zeroed, for run-to-run comparison.
    pub fn canonical(&self) -> Self {
        Self {
            latency_ms: 0,
            timestamp: 0,
            ..self.clone()
        }
    }
}

pub trait Backend: Send + Sync {
    /// Stable identifier written into records and reports.
    fn id(&self) -> String;

    /// Raw continuation for one request; stop truncation is applied by the
    /// caller.
    fn complete(&self, probe: &TransformedPrompt, request: &CompletionRequest) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 5,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay.saturating_mul(1u32 << retry.min(16))
    }
}

/// Runs `f` until it succeeds, fails with a non-retryable class, or the
/// attempts run out. Returns the outcome and the number of retries used.
pub fn with_retry<T>(
    policy: &RetryPolicy,
    mut f: impl FnMut() -> Result<T, BackendError>,
) -> (Result<T, BackendError>, u32) {
    let mut retries = 0;
    loop {
        match f() {
            Ok(v) => return (Ok(v), retries),
            Err(e) if e.class.is_retryable() && retries + 1 < policy.attempts.max(1) => {
                log::debug!("retrying after {e}");
                thread::sleep(policy.delay(retries));
                retries += 1;
            }
            Err(e) => return (Err(e), retries),
        }
    }
}

/// Backend selection as written on the command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    /// `synthetic:<profile>`
    Synthetic(Profile),
    /// `replay:<store path>`
    Replay(String),
    /// `http:<model>@<endpoint url>`
    Http { model: String, endpoint: String },
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("backend `{s}` must look like kind:argument"))?;
        match kind {
            "synthetic" => Ok(BackendSpec::Synthetic(rest.parse()?)),
            "replay" if !rest.is_empty() => Ok(BackendSpec::Replay(rest.to_string())),
            "http" => {
                let (model, endpoint) = rest
                    .split_once('@')
                    .filter(|(m, e)| !m.is_empty() && !e.is_empty())
                    .ok_or_else(|| format!("http backend `{s}` must look like http:model@url"))?;
                Ok(BackendSpec::Http {
                    model: model.to_string(),
                    endpoint: endpoint.to_string(),
                })
            }
            _ => Err(format!("unknown backend `{s}` (expected synthetic:, replay: or http:)")),
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Synthetic(p) => write!(f, "synthetic:{p}"),
            BackendSpec::Replay(path) => write!(f, "replay:{path}"),
            BackendSpec::Http { model, endpoint } => write!(f, "http:{model}@{endpoint}"),
        }
    }
}
