//! Completions backends, retry policy, response normalization and cached batch prediction.

mod backend;
mod batch;
mod cache;
mod config;

use std::fmt;
use std::sync::{Arc, LazyLock};

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cohort::Label;

pub use backend::{CompletionBackend, LiveBackend, MockBackend, Sleeper};
pub use batch::{batch_predict, BatchItem, BatchOutcome};
pub use cache::{CacheEntry, ResponseCache};
pub use config::{BackendConfig, BackendKind, MockMarker, MockRule, RetryPolicy};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BackendError {
    #[error("request timed out")]
    Timeout,
    #[error("backend returned HTTP {status}")]
    Status { status: u16, body: String },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("could not decode backend response: {0}")]
    Decode(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Timeout | BackendError::Transport(_) => true,
            BackendError::Status { status, .. } => *status == 429 || *status >= 500,
            BackendError::Auth(_) | BackendError::Config(_) | BackendError::Decode(_) => false,
        }
    }
}

/// A failed completion after the retry policy gave up.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{error} (after {attempts} attempt(s))")]
pub struct GatewayError {
    pub error: BackendError,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub raw: String,
    pub attempts: u32,
}

/// A backend plus the retry policy applied around it.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn CompletionBackend>,
    model_id: String,
    retry: RetryPolicy,
    sleeper: Sleeper,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("model_id", &self.model_id)
            .field("retry", &self.retry)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn from_config(config: &BackendConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let backend: Arc<dyn CompletionBackend> = match config.kind {
            BackendKind::Mock => Arc::new(MockBackend::new(config.mock.clone())),
            BackendKind::Live => Arc::new(LiveBackend::from_config(config)?),
        };
        Ok(Self::with_backend(
            backend,
            &config.model_id,
            config.retry.clone(),
        ))
    }

    pub fn with_backend(
        backend: Arc<dyn CompletionBackend>,
        model_id: &str,
        retry: RetryPolicy,
    ) -> Self {
        Self {
            backend,
            model_id: model_id.to_string(),
            retry,
            sleeper: std::thread::sleep,
        }
    }

    pub fn with_sleeper(mut self, sleeper: Sleeper) -> Self {
        self.sleeper = sleeper;
        self
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    /// Send one prompt, retrying retryable failures with exponential backoff.
    pub fn complete(&self, prompt: &str) -> Result<Completion, GatewayError> {
        let max = self.retry.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.backend.complete(prompt) {
                Ok(raw) => {
                    return Ok(Completion {
                        raw,
                        attempts: attempt,
                    })
                }
                Err(error) if error.is_retryable() && attempt < max => {
                    let delay = self.retry.backoff(attempt);
                    tracing::warn!(attempt, ?delay, %error, "retrying completion");
                    (self.sleeper)(delay);
                }
                Err(error) => {
                    return Err(GatewayError {
                        error,
                        attempts: attempt,
                    })
                }
            }
        }
    }
}

/// Build the configured backend and return the raw completion for one prompt.
pub fn complete(config: &BackendConfig, prompt: &str) -> Result<String, GatewayError> {
    let gateway =
        Gateway::from_config(config).map_err(|error| GatewayError { error, attempts: 0 })?;
    gateway.complete(prompt).map(|c| c.raw)
}

/// Normalized class of a model completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Resistant,
    Sensitive,
    Unparseable,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Sensitive => "sensitive",
            Outcome::Resistant => "resistant",
            Outcome::Unparseable => "unparseable",
        }
    }

    pub fn label(self) -> Option<Label> {
        match self {
            Outcome::Sensitive => Some(Label::Sensitive),
            Outcome::Resistant => Some(Label::Resistant),
            Outcome::Unparseable => None,
        }
    }
}

impl From<Label> for Outcome {
    fn from(l: Label) -> Self {
        match l {
            Label::Sensitive => Outcome::Sensitive,
            Label::Resistant => Outcome::Resistant,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

static CLASS_WORD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(sensitive|resistant)\b").expect("valid pattern"));

/// Map free text to a class: the earliest whole-word "sensitive" or "resistant",
/// case-insensitively; otherwise unparseable.
pub fn normalize_response(raw: &str) -> Outcome {
    let lower = raw.to_lowercase();
    match CLASS_WORD.find(&lower).map(|m| m.as_str()) {
        Some("sensitive") => Outcome::Sensitive,
        Some("resistant") => Outcome::Resistant,
        _ => Outcome::Unparseable,
    }
}

/// Hex SHA-256 of the prompt text.
pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub outcome: Outcome,
    /// Completion text exactly as returned.
    pub raw: String,
    pub prompt_digest: String,
}

impl Prediction {
    pub fn from_raw(prompt: &str, raw: String) -> Self {
        Self {
            outcome: normalize_response(&raw),
            raw,
            prompt_digest: prompt_digest(prompt),
        }
    }
}
