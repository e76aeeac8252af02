use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{prompt_digest, Gateway, GatewayError, Prediction, ResponseCache};
use crate::parallel;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum BatchItem {
    Ok(Prediction),
    Failed {
        error: String,
        attempts: u32,
        prompt_digest: String,
    },
}

impl BatchItem {
    pub fn prediction(&self) -> Option<&Prediction> {
        match self {
            BatchItem::Ok(p) => Some(p),
            BatchItem::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchOutcome {
    /// One entry per input prompt, in input order.
    pub items: Vec<BatchItem>,
    /// Input indices whose completion failed after retries.
    pub failed: Vec<usize>,
    /// Distinct prompts that were sent to the backend in this run.
    pub backend_requests: usize,
}

/// Complete every prompt, in input order, with at most `parallelism` requests in flight.
///
/// Each distinct prompt reaches the backend at most once per run and not at all when the
/// cache already holds it. Failures become per-item markers instead of aborting the run.
pub fn batch_predict(
    gateway: &Gateway,
    prompts: &[String],
    parallelism: usize,
    cache: &ResponseCache,
) -> BatchOutcome {
    let model = gateway.model_id();
    let digests: Vec<String> = prompts.iter().map(|p| prompt_digest(p)).collect();

    let mut resolved: HashMap<&str, Result<String, GatewayError>> = HashMap::new();
    let mut pending: Vec<(&str, &str)> = Vec::new();
    for (prompt, digest) in prompts.iter().zip(&digests) {
        if resolved.contains_key(digest.as_str()) || pending.iter().any(|(d, _)| *d == digest) {
            continue;
        }
        match cache.get_by_hash(model, digest) {
            Some(raw) => {
                resolved.insert(digest, Ok(raw));
            }
            None => pending.push((digest, prompt)),
        }
    }

    let backend_requests = pending.len();
    let results = parallel::map_bounded(parallelism.max(1), &pending, |(_, prompt)| {
        gateway.complete(prompt).map(|c| c.raw)
    });
    for ((digest, prompt), result) in pending.iter().zip(results) {
        if let Ok(raw) = &result {
            if let Err(err) = cache.insert(model, prompt, raw) {
                tracing::warn!(%err, "could not persist cached response");
            }
        }
        resolved.insert(digest, result);
    }

    let mut failed = Vec::new();
    let items = prompts
        .iter()
        .zip(&digests)
        .enumerate()
        .map(|(i, (prompt, digest))| match &resolved[digest.as_str()] {
            Ok(raw) => BatchItem::Ok(Prediction::from_raw(prompt, raw.clone())),
            Err(e) => {
                failed.push(i);
                BatchItem::Failed {
                    error: e.error.to_string(),
                    attempts: e.attempts,
                    prompt_digest: digest.clone(),
                }
            }
        })
        .collect();

    BatchOutcome {
        items,
        failed,
        backend_requests,
    }
}
