use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use thiserror::Error;

use super::{truncate_at_stop, with_retry, Backend, CompletionRecord, CompletionRequest, RateLimiter, RetryPolicy};
use crate::jsonl::{self, JsonlError};
use crate::transforms::TransformedPrompt;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Store(#[from] JsonlError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{0} already exists; resume the run or choose another output")]
    Exists(String),
}

#[derive(Clone)]
pub struct BatchOptions {
    pub parallelism: usize,
    pub retry: RetryPolicy,
    pub limiter: Option<Arc<RateLimiter>>,
    /// Keep successful records from an earlier, possibly interrupted, run.
    pub resume: bool,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            parallelism: 4,
            retry: RetryPolicy::default(),
            limiter: None,
            resume: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunSummary {
    pub total: usize,
    /// Records carried over from a previous run.
    pub reused: usize,
    /// Probes sent to the backend in this run.
    pub requested: usize,
    pub failed: usize,
}

fn journal_path(store: &Path) -> PathBuf {
    store.with_extension("journal")
}

/// Reads a run store, sorted by probe id as written.
pub fn read_store(path: &Path) -> Result<Vec<CompletionRecord>, JsonlError> {
    jsonl::read_all(path)
}

fn read_if_present(path: &Path) -> Result<Vec<CompletionRecord>, JsonlError> {
    match jsonl::read_all(path) {
        Err(e) if e.is_not_found() => Ok(vec![]),
        other => other,
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn complete_one(backend: &dyn Backend, probe: &TransformedPrompt, opts: &BatchOptions) -> CompletionRecord {
    let request = CompletionRequest::for_probe(probe);
    let started = Instant::now();
    let (outcome, retries) = with_retry(&opts.retry, || {
        if let Some(limiter) = &opts.limiter {
            limiter.acquire();
        }
        backend.complete(probe, &request)
    });
    let (completion_text, error, error_detail) = match outcome {
        Ok(text) => (truncate_at_stop(&text, &request.stop_sequences).to_string(), None, None),
        Err(e) => (String::new(), Some(e.class), Some(e.message)),
    };
    CompletionRecord {
        probe_id: probe.probe_id.clone(),
        backend_id: backend.id(),
        completion_text,
        latency_ms: started.elapsed().as_millis() as u64,
        retries,
        timestamp: now_ms(),
        error,
        error_detail,
    }
}

/// Produces exactly one record per probe and writes them to `store` sorted
/// by probe id. Records stream into a journal beside the store as they
/// complete, so an interrupted run can be resumed.
pub fn run_batch(
    probes: &[TransformedPrompt],
    backend: &dyn Backend,
    store: &Path,
    opts: &BatchOptions,
) -> Result<RunSummary, RunError> {
    let journal = journal_path(store);
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| RunError::Io { path, source }
    };

    let mut done: BTreeMap<String, CompletionRecord> = BTreeMap::new();
    if opts.resume {
        let wanted: std::collections::HashSet<&str> = probes.iter().map(|p| p.probe_id.as_str()).collect();
        for rec in read_if_present(store)?.into_iter().chain(read_if_present(&journal)?) {
            if !rec.is_failed() && wanted.contains(rec.probe_id.as_str()) {
                done.insert(rec.probe_id.clone(), rec);
            }
        }
    } else if store.exists() {
        return Err(RunError::Exists(store.display().to_string()));
    }
    let reused = done.len();
    let pending: Vec<&TransformedPrompt> = probes.iter().filter(|p| !done.contains_key(&p.probe_id)).collect();

    if let Some(parent) = store.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let journal_file = OpenOptions::new()
        .create(true)
        .append(opts.resume)
        .write(true)
        .truncate(!opts.resume)
        .open(&journal)
        .map_err(io_err(&journal))?;
    let mut writer = BufWriter::new(journal_file);

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<CompletionRecord>();
    let workers = opts.parallelism.max(1).min(pending.len().max(1));
    let mut failed = 0;
    thread::scope(|scope| -> Result<(), RunError> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, pending) = (&next, &pending);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(probe) = pending.get(i) else { break };
                if tx.send(complete_one(backend, probe, opts)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for rec in rx {
            jsonl::append(&mut writer, &rec).map_err(io_err(&journal))?;
            if rec.is_failed() {
                log::warn!("{}: {}", rec.probe_id, rec.error_detail.as_deref().unwrap_or("failed"));
                failed += 1;
            }
            done.insert(rec.probe_id.clone(), rec);
        }
        Ok(())
    })?;
    drop(writer);

    let records: Vec<CompletionRecord> = done.into_values().collect();
    jsonl::write_all(store, &records)?;
    fs::remove_file(&journal).map_err(io_err(&journal))?;
    Ok(RunSummary {
        total: records.len(),
        reused,
        requested: pending.len(),
        failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{BackendError, ErrorClass, ReplayBackend};
    use crate::transforms::{Condition, Experiment};
    use std::collections::HashMap;
    use std::sync::atomic::AtomicUsize;
    use std::time::Duration;

    fn probe(id: &str) -> TransformedPrompt {
        TransformedPrompt {
            probe_id: id.into(),
            experiment: Experiment::Framing,
            base_task: None,
            condition: Condition::FramingOriginal,
            prompt_text: "def f(x):\n".into(),
            detection_targets: vec![],
            reference_spec: None,
        }
    }

    struct Counting {
        inner: ReplayBackend,
        calls: AtomicUsize,
    }

    impl Backend for Counting {
        fn id(&self) -> String {
            self.inner.id()
        }

        fn complete(&self, p: &TransformedPrompt, r: &CompletionRequest) -> Result<String, BackendError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.complete(p, r)
        }
    }

    fn opts(resume: bool) -> BatchOptions {
        BatchOptions {
            parallelism: 3,
            retry: RetryPolicy {
                attempts: 5,
                base_delay: Duration::ZERO,
            },
            limiter: None,
            resume,
        }
    }

    #[test]
    fn missing_fixtures_fail_individually_and_resume_retries_them() {
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().join("run.jsonl");
        let probes: Vec<_> = (0..20).map(|i| probe(&format!("p{i:02}"))).collect();
        let mut map: HashMap<String, String> = (3..20)
            .map(|i| (format!("p{i:02}"), "    return x\n\ndef extra():\n".to_string()))
            .collect();
        let backend = Counting {
            inner: ReplayBackend::from_map("replay", map.clone()),
            calls: AtomicUsize::new(0),
        };
        let s = run_batch(&probes, &backend, &store, &opts(false)).unwrap();
        assert_eq!((s.total, s.failed, s.requested), (20, 3, 20));
        let records = read_store(&store).unwrap();
        let ids: Vec<_> = records.iter().map(|r| r.probe_id.clone()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
        assert_eq!(records[5].completion_text, "    return x\n");
        assert_eq!(records[0].error, Some(ErrorClass::MissingFixture));
        assert!(!journal_path(&store).exists());

        assert!(matches!(run_batch(&probes, &backend, &store, &opts(false)), Err(RunError::Exists(_))));

        for i in 0..3 {
            map.insert(format!("p{i:02}"), "    return 1\n".into());
        }
        let backend = Counting {
            inner: ReplayBackend::from_map("replay", map),
            calls: AtomicUsize::new(0),
        };
        let s = run_batch(&probes, &backend, &store, &opts(true)).unwrap();
        assert_eq!((s.reused, s.requested, s.failed), (17, 3, 0));
        assert_eq!(backend.calls.load(Ordering::SeqCst), 3);

        let s = run_batch(&probes, &backend, &store, &opts(true)).unwrap();
        assert_eq!(s.requested, 0);
        assert_eq!(backend.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn interrupted_journal_is_picked_up() {
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().join("run.jsonl");
        let probes = vec![probe("a"), probe("b")];
        let done = CompletionRecord {
            probe_id: "a".into(),
            backend_id: "replay".into(),
            completion_text: "x".into(),
            latency_ms: 1,
            retries: 0,
            timestamp: 1,
            error: None,
            error_detail: None,
        };
        jsonl::write_all(&journal_path(&store), std::slice::from_ref(&done)).unwrap();
        let backend = ReplayBackend::from_map("replay", HashMap::from([("b".to_string(), "y".to_string())]));
        let s = run_batch(&probes, &backend, &store, &opts(true)).unwrap();
        assert_eq!((s.reused, s.requested), (1, 1));
        assert_eq!(read_store(&store).unwrap()[0], done);
    }
}
