use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::BackendError;
use crate::cohort::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Mock,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Live => "live",
            BackendKind::Mock => "mock",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_backoff_ms: u64,
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1`, doubling from the base.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64 << attempt.saturating_sub(1).min(16);
        Duration::from_millis(self.base_backoff_ms.saturating_mul(factor))
    }
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_backoff_ms: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockMarker {
    pub marker: String,
    pub label: Label,
}

/// Test double: the first marker found in the prompt decides the answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockRule {
    pub rules: Vec<MockMarker>,
    pub default: Label,
}

impl MockRule {
    pub fn new<I, S>(rules: I, default: Label) -> Self
    where
        I: IntoIterator<Item = (S, Label)>,
        S: Into<String>,
    {
        Self {
            rules: rules
                .into_iter()
                .map(|(marker, label)| MockMarker {
                    marker: marker.into(),
                    label,
                })
                .collect(),
            default,
        }
    }

    pub fn apply(&self, prompt: &str) -> Label {
        self.rules
            .iter()
            .find(|r| prompt.contains(&r.marker))
            .map_or(self.default, |r| r.label)
    }
}

impl Default for MockRule {
    fn default() -> Self {
        Self {
            rules: Vec::new(),
            default: Label::Resistant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint_url: String,
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_ms: u64,
    pub retry: RetryPolicy,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub mock: MockRule,
}

impl BackendConfig {
    pub const DEFAULT_API_KEY_ENV: &'static str = "LLM_API_KEY";

    pub fn mock(rule: MockRule) -> Self {
        Self {
            kind: BackendKind::Mock,
            mock: rule,
            ..Self::default()
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let bad = |m: String| Err(BackendError::Config(m));
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return bad(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            ));
        }
        if self.retry.max_attempts < 1 {
            return bad("retry.max_attempts must be >= 1".into());
        }
        if self.max_tokens < 1 {
            return bad("max_tokens must be >= 1".into());
        }
        if self.model_id.trim().is_empty() {
            return bad("model_id is empty".into());
        }
        Ok(())
    }
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            endpoint_url: "https://api.openai.com/v1/completions".into(),
            model_id: "ada".into(),
            temperature: 0.0,
            max_tokens: 4,
            timeout_ms: 30_000,
            retry: RetryPolicy::default(),
            api_key_env: Self::DEFAULT_API_KEY_ENV.into(),
            mock: MockRule::default(),
        }
    }
}
