use std::borrow::Cow;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use drugsense::cohort::{Feature, FeatureSet};
use drugsense::gateway::normalize_response;
use drugsense::prompt::{serialize_zero_shot, FeatureSource, PromptError};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{AppState, VERSION};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    #[serde(default)]
    pub drug: Option<String>,
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub cell_line: Option<String>,
    #[serde(default)]
    pub smiles: Option<String>,
    #[serde(default)]
    pub mutations: Option<Vec<String>>,
    #[serde(default)]
    pub feature_set: Option<FeatureSet>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub label: String,
    pub raw: String,
    pub prompt: String,
    pub model_id: String,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

struct ApiError {
    status: StatusCode,
    body: ErrorBody,
    retry_after: Option<u64>,
}

impl ApiError {
    fn bad_request(error: impl Into<String>, field: Option<&str>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            body: ErrorBody {
                error: error.into(),
                field: field.map(str::to_string),
            },
            retry_after: None,
        }
    }

    fn status(status: StatusCode, error: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                error: error.into(),
                field: None,
            },
            retry_after: None,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut resp = (self.status, Json(self.body)).into_response();
        if let Some(secs) = self.retry_after {
            resp.headers_mut()
                .insert(header::RETRY_AFTER, HeaderValue::from(secs));
        }
        resp
    }
}

/// Request fields after server-side normalization. SMILES keep their case.
struct PromptInput {
    drug: String,
    target: Option<String>,
    cell_line: Option<String>,
    smiles: Option<String>,
    mutations: Vec<String>,
}

fn clean(s: &Option<String>) -> Option<String> {
    s.as_deref()
        .map(|v| v.trim().to_lowercase())
        .filter(|v| !v.is_empty())
}

impl PromptInput {
    fn from_request(req: &PredictRequest) -> Result<Self, ApiError> {
        let drug = clean(&req.drug)
            .ok_or_else(|| ApiError::bad_request("`drug` is required", Some("drug")))?;
        let mut mutations: Vec<String> = req
            .mutations
            .iter()
            .flatten()
            .map(|g| g.trim().to_lowercase())
            .filter(|g| !g.is_empty())
            .collect();
        mutations.sort();
        mutations.dedup();
        Ok(Self {
            drug,
            target: clean(&req.target),
            cell_line: clean(&req.cell_line),
            smiles: req
                .smiles
                .as_deref()
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string),
            mutations,
        })
    }

    fn provided(&self) -> FeatureSet {
        let features = Feature::ALL
            .into_iter()
            .filter(|f| self.feature_value(*f).is_some());
        FeatureSet::from_features(features).expect("drug is always provided")
    }
}

impl FeatureSource for PromptInput {
    fn feature_value(&self, feature: Feature) -> Option<Cow<'_, str>> {
        match feature {
            Feature::Drug => Some(Cow::Borrowed(self.drug.as_str())),
            Feature::Target => self.target.as_deref().map(Cow::Borrowed),
            Feature::CellLine => self.cell_line.as_deref().map(Cow::Borrowed),
            Feature::Smiles => self.smiles.as_deref().map(Cow::Borrowed),
            Feature::Mutation => {
                (!self.mutations.is_empty()).then(|| Cow::Owned(self.mutations.join(", ")))
            }
        }
    }
}

pub(crate) async fn predict(State(state): State<AppState>, body: Bytes) -> Response {
    match predict_inner(state, body).await {
        Ok(resp) => (StatusCode::OK, Json(resp)).into_response(),
        Err(err) => err.into_response(),
    }
}

async fn predict_inner(state: AppState, body: Bytes) -> Result<PredictResponse, ApiError> {
    let started = Instant::now();
    let req: PredictRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("malformed request body: {e}"), None))?;
    let input = PromptInput::from_request(&req)?;
    let config = state.config();

    let features = match req.feature_set {
        Some(fs) => fs,
        None => {
            let allowed = input
                .provided()
                .iter()
                .filter(|f| config.feature_set.contains(*f));
            FeatureSet::from_features(allowed.chain([Feature::Drug])).expect("drug included")
        }
    };
    let prompt = serialize_zero_shot(&input, features, &config.serialization_order)
        .map_err(|e| match e {
            PromptError::MissingField(field) | PromptError::NotInOrder(field) => {
                ApiError::bad_request(e.to_string(), Some(field))
            }
            other => ApiError::bad_request(other.to_string(), None),
        })?
        .full_text;

    let gateway = match &state.inner.gateway {
        Ok(gw) => gw.clone(),
        Err(err) => {
            return Err(ApiError::status(
                StatusCode::SERVICE_UNAVAILABLE,
                format!("backend unavailable: {err}"),
            ))
        }
    };
    let model_id = gateway.model_id().to_string();

    let raw = match state.inner.cache.get(&model_id, &prompt) {
        Some(raw) => raw,
        None => {
            let p = prompt.clone();
            let result = tokio::task::spawn_blocking(move || gateway.complete(&p))
                .await
                .map_err(|e| ApiError::status(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
            match result {
                Ok(done) => {
                    if let Err(err) = state.inner.cache.insert(&model_id, &prompt, &done.raw) {
                        tracing::warn!(%err, "could not persist cached response");
                    }
                    done.raw
                }
                Err(err) => {
                    tracing::warn!(error = %err, "backend exhausted");
                    return Err(ApiError {
                        status: StatusCode::BAD_GATEWAY,
                        body: ErrorBody {
                            error: format!("backend failed: {err}"),
                            field: None,
                        },
                        retry_after: Some(config.retry_after_secs),
                    });
                }
            }
        }
    };

    Ok(PredictResponse {
        label: normalize_response(&raw).as_str().to_string(),
        raw,
        prompt,
        model_id,
        latency_ms: started.elapsed().as_millis() as u64,
    })
}

pub(crate) async fn health(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "version": VERSION,
        "backend": state.config().backend.kind.as_str(),
    }))
}

/// Public view of the configuration. Carries no credentials.
pub(crate) async fn config(State(state): State<AppState>) -> Json<serde_json::Value> {
    let c = state.config();
    Json(json!({
        "model_id": c.backend.model_id,
        "backend": c.backend.kind.as_str(),
        "feature_set": c.feature_set,
        "serialization_order": c.serialization_order,
        "temperature": c.backend.temperature,
        "max_tokens": c.backend.max_tokens,
    }))
}
