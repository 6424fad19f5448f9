use std::collections::HashMap;
use std::path::Path;

use super::{Backend, BackendError, CompletionRecord, CompletionRequest, ErrorClass};
use crate::jsonl::{self, JsonlError};
use crate::transforms::TransformedPrompt;

/// Answers from a stored run: the successful record for each probe id.
pub struct ReplayBackend {
    id: String,
    completions: HashMap<String, String>,
}

impl ReplayBackend {
    pub fn load(path: &Path) -> Result<Self, JsonlError> {
        let records: Vec<CompletionRecord> = jsonl::read_all(path)?;
        let id = records
            .iter()
            .map(|r| r.backend_id.clone())
            .next()
            .unwrap_or_else(|| "replay".to_string());
        Ok(Self::from_records(id, records))
    }

    pub fn from_records(id: String, records: impl IntoIterator<Item = CompletionRecord>) -> Self {
        let completions = records
            .into_iter()
            .filter(|r| !r.is_failed())
            .map(|r| (r.probe_id, r.completion_text))
            .collect();
        Self { id, completions }
    }

    pub fn from_map(id: &str, completions: HashMap<String, String>) -> Self {
        Self {
            id: id.to_string(),
            completions,
        }
    }

    pub fn len(&self) -> usize {
        self.completions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.completions.is_empty()
    }
}

impl Backend for ReplayBackend {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn complete(&self, _probe: &TransformedPrompt, request: &CompletionRequest) -> Result<String, BackendError> {
        self.completions
            .get(&request.probe_id)
            .cloned()
            .ok_or_else(|| BackendError::new(ErrorClass::MissingFixture, format!("no stored completion for {}", request.probe_id)))
    }
}
