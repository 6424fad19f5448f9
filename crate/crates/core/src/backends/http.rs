//! Remote completions endpoint speaking the common `choices[0].text` schema.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{Backend, BackendError, CompletionRequest, ErrorClass};
use crate::transforms::TransformedPrompt;

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "BIAS_PROBE_API_KEY";

pub struct HttpBackend {
    agent: ureq::Agent,
    model: String,
    endpoint: String,
    api_key: Option<String>,
}

#[derive(Deserialize)]
struct Choice {
    text: String,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

impl HttpBackend {
    /// Reads the API key from [`API_KEY_ENV`]; requests go out unauthenticated
    /// when it is unset.
    pub fn new(model: &str, endpoint: &str, timeout: Duration) -> Self {
        Self::with_key(model, endpoint, timeout, std::env::var(API_KEY_ENV).ok())
    }

    pub fn with_key(model: &str, endpoint: &str, timeout: Duration, api_key: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            model: model.to_string(),
            endpoint: endpoint.to_string(),
            api_key,
        }
    }
}

fn classify_status(status: u16) -> ErrorClass {
    match status {
        429 => ErrorClass::RateLimited,
        401 | 403 => ErrorClass::Auth,
        408 => ErrorClass::Timeout,
        500..=599 => ErrorClass::Server,
        _ => ErrorClass::Client,
    }
}

fn classify_error(err: &ureq::Error) -> ErrorClass {
    match err {
        ureq::Error::Timeout(_) => ErrorClass::Timeout,
        ureq::Error::StatusCode(code) => classify_status(*code),
        ureq::Error::Io(e) if e.kind() == std::io::ErrorKind::TimedOut => ErrorClass::Timeout,
        ureq::Error::Json(_) => ErrorClass::InvalidResponse,
        _ => ErrorClass::Transport,
    }
}

impl Backend for HttpBackend {
    fn id(&self) -> String {
        format!("http:{}", self.model)
    }

    fn complete(&self, _probe: &TransformedPrompt, request: &CompletionRequest) -> Result<String, BackendError> {
        let body = json!({
            "model": self.model,
            "prompt": request.prompt_text,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
            "stop": request.stop_sequences,
        });
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = req
            .send_json(&body)
            .map_err(|e| BackendError::new(classify_error(&e), e.to_string()))?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            let text = response.body_mut().read_to_string().unwrap_or_default();
            let snippet: String = text.chars().take(200).collect();
            return Err(BackendError::new(classify_status(status), format!("HTTP {status}: {snippet}")));
        }
        let parsed: CompletionResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::new(ErrorClass::InvalidResponse, e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.text)
            .ok_or_else(|| BackendError::new(ErrorClass::InvalidResponse, "response has no choices"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_classes() {
        assert_eq!(classify_status(429), ErrorClass::RateLimited);
        assert_eq!(classify_status(401), ErrorClass::Auth);
        assert_eq!(classify_status(503), ErrorClass::Server);
        assert_eq!(classify_status(400), ErrorClass::Client);
    }

    #[test]
    fn id_names_model() {
        let b = HttpBackend::with_key("m", "http://127.0.0.1:9/", Duration::from_secs(1), None);
        assert_eq!(b.id(), "http:m");
    }
}
