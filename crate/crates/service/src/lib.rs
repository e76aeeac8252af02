//! Stateless HTTP front end for single-pair drug sensitivity prediction.
//!
//! Routes:
//! - `POST /api/v1/predict`
//! - `GET  /api/v1/health`
//! - `GET  /api/v1/config`

mod api;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::http::{header, HeaderValue, Method};
use axum::routing::{get, post};
use axum::Router;
use drugsense::gateway::{BackendConfig, BackendError, Gateway, ResponseCache};
use drugsense::{FeatureSet, SerializationOrder};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::trace::TraceLayer;

pub use api::{ErrorBody, PredictRequest, PredictResponse};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `[service]` section of the run configuration plus the backend it fronts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub port: u16,
    /// Fields the service may serialize; request fields outside it are ignored.
    pub feature_set: FeatureSet,
    /// Filled from the `[prompt]` section so batch and service prompts agree.
    #[serde(skip)]
    pub serialization_order: SerializationOrder,
    /// Browser origins allowed by CORS.
    pub cors_origins: Vec<String>,
    pub cache_dir: Option<PathBuf>,
    /// Seconds suggested to clients in `Retry-After` when the backend is exhausted.
    pub retry_after_secs: u64,
    #[serde(skip)]
    pub backend: BackendConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            port: 8080,
            feature_set: FeatureSet::full(),
            serialization_order: SerializationOrder::default(),
            cors_origins: vec!["http://localhost:5173".into()],
            cache_dir: None,
            retry_after_secs: 5,
            backend: BackendConfig::default(),
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    config: ServiceConfig,
    /// Missing credentials do not stop the service; predict reports them per request.
    gateway: Result<Gateway, BackendError>,
    cache: ResponseCache,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> std::io::Result<Self> {
        let gateway = Gateway::from_config(&config.backend);
        if let Err(err) = &gateway {
            tracing::warn!(%err, "backend unavailable; predict will fail until configured");
        }
        let cache = match &config.cache_dir {
            Some(dir) => ResponseCache::open(dir)?,
            None => ResponseCache::in_memory(),
        };
        Ok(Self::with_parts(config, gateway, cache))
    }

    /// Assemble state around an explicit gateway, e.g. a test double.
    pub fn with_parts(
        config: ServiceConfig,
        gateway: Result<Gateway, BackendError>,
        cache: ResponseCache,
    ) -> Self {
        Self {
            inner: Arc::new(Inner {
                config,
                gateway,
                cache,
            }),
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }
}

fn cors(origins: &[String]) -> CorsLayer {
    let origins: Vec<HeaderValue> = origins
        .iter()
        .filter_map(|o| match HeaderValue::from_str(o) {
            Ok(v) => Some(v),
            Err(_) => {
                tracing::warn!(origin = %o, "ignoring invalid CORS origin");
                None
            }
        })
        .collect();
    CorsLayer::new()
        .allow_origin(AllowOrigin::list(origins))
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE])
}

pub fn router(state: AppState) -> Router {
    let cors = cors(&state.config().cors_origins);
    Router::new()
        .route("/api/v1/predict", post(api::predict))
        .route("/api/v1/health", get(api::health))
        .route("/api/v1/config", get(api::config))
        .layer(cors)
        .layer(TraceLayer::new_for_http())
        .with_state(state)
}

/// Bind and serve until ctrl-c.
pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let addr = SocketAddr::from(([0, 0, 0, 0], config.port));
    let state = AppState::new(config)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
