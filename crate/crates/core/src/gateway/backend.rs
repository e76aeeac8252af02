use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde_json::{json, Value};

use super::{BackendConfig, BackendError, MockRule};

/// One completions request, without retries.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, BackendError>;
}

/// Deterministic backend answering from a [`MockRule`]; counts its calls.
#[derive(Debug, Default)]
pub struct MockBackend {
    rule: MockRule,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(rule: MockRule) -> Self {
        Self {
            rule,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(self.rule.apply(prompt).as_str().to_string())
    }
}

/// HTTP backend for completions-style endpoints.
pub struct LiveBackend {
    agent: ureq::Agent,
    endpoint_url: String,
    model_id: String,
    temperature: f64,
    max_tokens: u32,
    api_key: String,
}

impl fmt::Debug for LiveBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LiveBackend")
            .field("endpoint_url", &self.endpoint_url)
            .field("model_id", &self.model_id)
            .field("api_key", &"<redacted>")
            .finish()
    }
}

impl LiveBackend {
    /// Reads the key from the configured environment variable; fails before any network I/O
    /// when it is unset or empty.
    pub fn from_config(config: &BackendConfig) -> Result<Self, BackendError> {
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| {
                BackendError::Config(format!(
                    "environment variable `{}` is not set",
                    config.api_key_env
                ))
            })?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout()))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            agent,
            endpoint_url: config.endpoint_url.clone(),
            model_id: config.model_id.clone(),
            temperature: config.temperature,
            max_tokens: config.max_tokens,
            api_key,
        })
    }
}

fn classify_status(status: u16, body: String) -> BackendError {
    match status {
        401 | 403 => BackendError::Auth(format!("HTTP {status}")),
        _ => BackendError::Status { status, body },
    }
}

impl CompletionBackend for LiveBackend {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let body = json!({
            "model": self.model_id,
            "prompt": prompt,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        });
        let mut resp = self
            .agent
            .post(&self.endpoint_url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => BackendError::Timeout,
                other => BackendError::Transport(other.to_string()),
            })?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(classify_status(status, text));
        }
        let value: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Decode(e.to_string()))?;
        first_choice_text(&value)
    }
}

pub(crate) fn first_choice_text(value: &Value) -> Result<String, BackendError> {
    value
        .pointer("/choices/0/text")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::Decode("response has no choices[0].text".into()))
}

/// Sleep hook between retries; tests swap in a no-op.
pub type Sleeper = fn(Duration);
