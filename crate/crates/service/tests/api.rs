use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use drugsense::cohort::{Label, PairRecord, Tissue};
use drugsense::gateway::{
    BackendConfig, BackendError, BackendKind, CompletionBackend, Gateway, MockRule, ResponseCache,
    RetryPolicy,
};
use drugsense::prompt::{serialize_zero_shot, SerializationOrder};
use drugsense_service::{router, AppState, PredictResponse, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const PCI_SMILES: &str = "COC1=CC=C(C=C1)CN2C=CC3=C2C=C(C=C3)C(=O)NO";

fn mock_app(rule: MockRule) -> Router {
    let config = ServiceConfig {
        backend: BackendConfig::mock(rule),
        ..ServiceConfig::default()
    };
    router(AppState::new(config).unwrap())
}

fn crebbp_app() -> Router {
    mock_app(MockRule::new(
        [("crebbp", Label::Sensitive)],
        Label::Resistant,
    ))
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    (status, headers, body)
}

fn post(body: impl Into<Body>) -> Request<Body> {
    Request::post("/api/v1/predict")
        .header(header::CONTENT_TYPE, "application/json")
        .body(body.into())
        .unwrap()
}

fn post_json(v: Value) -> Request<Body> {
    post(v.to_string())
}

fn get(path: &str) -> Request<Body> {
    Request::get(path).body(Body::empty()).unwrap()
}

fn pci_request() -> Value {
    json!({
        "drug": "PCI-34051",
        "target": "HDAC1",
        "smiles": PCI_SMILES,
        "mutations": ["CREBBP"],
    })
}

#[tokio::test]
async fn predict_pci_example() {
    let app = crebbp_app();
    let (status, _, body) = call(&app, post_json(pci_request())).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let resp: PredictResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(resp.label, "sensitive");
    assert_eq!(resp.raw, "sensitive");
    assert_eq!(resp.model_id, "ada");

    let record = PairRecord::new("pci-34051", "unused", Tissue::Luad, 0.0)
        .with_target("hdac1")
        .with_smiles(PCI_SMILES)
        .with_mutations(["crebbp"]);
    let expected = serialize_zero_shot(
        &record,
        "drug,target,smiles,mutation".parse().unwrap(),
        &SerializationOrder::default(),
    )
    .unwrap();
    assert_eq!(resp.prompt, expected.full_text);
    assert!(resp.prompt.ends_with(
        "The drug name is pci-34051. The drug target is hdac1. The drug smile is \
         COC1=CC=C(C=C1)CN2C=CC3=C2C=C(C=C3)C(=O)NO. The gene mutation is crebbp. Drug response:"
    ));
}

#[tokio::test]
async fn default_branch() {
    let app = crebbp_app();
    let (status, _, body) = call(&app, post_json(json!({"drug": "x"}))).await;
    assert_eq!(status, StatusCode::OK);
    let resp: PredictResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(resp.label, "resistant");
    assert!(resp
        .prompt
        .ends_with("\nThe drug name is x. Drug response:"));
}

#[tokio::test]
async fn missing_or_empty_drug_is_400() {
    let app = crebbp_app();
    for body in [
        json!({}),
        json!({"drug": ""}),
        json!({"drug": "   ", "target": "egfr"}),
    ] {
        let (status, _, bytes) = call(&app, post_json(body.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        let err: Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(err["field"], "drug");
        assert!(err["error"].as_str().unwrap().contains("drug"));
    }
}

#[tokio::test]
async fn malformed_bodies_are_400() {
    let app = crebbp_app();
    for body in [
        "",
        "{",
        "[1,2]",
        r#"{"drug": 5}"#,
        r#"{"drug":"x","dose":3}"#,
    ] {
        let (status, _, _) = call(&app, post(body)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
    }
}

#[tokio::test]
async fn feature_override_must_be_satisfiable() {
    let app = crebbp_app();
    let (status, _, body) = call(
        &app,
        post_json(json!({"drug": "x", "feature_set": ["drug", "smiles"]})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let err: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(err["field"], "smiles");

    let (status, _, body) = call(
        &app,
        post_json(json!({"drug": "x", "cell_line": "A549", "mutations": ["crebbp"], "feature_set": "drug,cell_line"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let resp: PredictResponse = serde_json::from_slice(&body).unwrap();
    assert!(resp
        .prompt
        .ends_with("The drug name is x. The cell line is a549. Drug response:"));
    assert_eq!(resp.label, "resistant");
}

#[tokio::test]
async fn identical_requests_identical_bodies() {
    let app = crebbp_app();
    let mut bodies = Vec::new();
    for _ in 0..2 {
        let (_, _, body) = call(&app, post_json(pci_request())).await;
        let mut v: Value = serde_json::from_slice(&body).unwrap();
        v.as_object_mut().unwrap().remove("latency_ms");
        bodies.push(v);
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[tokio::test]
async fn concurrent_requests() {
    let app = crebbp_app();
    let tasks: Vec<_> = (0..16)
        .map(|i| {
            let app = app.clone();
            tokio::spawn(async move {
                let gene = if i % 2 == 0 { "crebbp" } else { "tp53" };
                let (status, _, body) = call(
                    &app,
                    post_json(json!({"drug": format!("d{i}"), "mutations": [gene]})),
                )
                .await;
                assert_eq!(status, StatusCode::OK);
                let resp: PredictResponse = serde_json::from_slice(&body).unwrap();
                (i, resp.label)
            })
        })
        .collect();
    for t in tasks {
        let (i, label) = t.await.unwrap();
        assert_eq!(label, if i % 2 == 0 { "sensitive" } else { "resistant" });
    }
}

#[tokio::test]
async fn health_reports_mock() {
    let app = crebbp_app();
    let (status, _, body) = call(&app, get("/api/v1/health")).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["status"], "ok");
    assert_eq!(v["backend"], "mock");
    assert!(v["version"].is_string());
}

#[tokio::test]
async fn health_without_api_key() {
    let config = ServiceConfig {
        backend: BackendConfig {
            kind: BackendKind::Live,
            api_key_env: "DRUGSENSE_SVC_TEST_ABSENT_KEY".into(),
            ..BackendConfig::default()
        },
        ..ServiceConfig::default()
    };
    let app = router(AppState::new(config).unwrap());
    let (status, _, body) = call(&app, get("/api/v1/health")).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["backend"], "live");

    let (status, _, _) = call(&app, post_json(json!({"drug": "x"}))).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
}

#[tokio::test]
async fn config_view_echoes_settings() {
    let config = ServiceConfig {
        feature_set: "drug,mutation".parse().unwrap(),
        backend: BackendConfig {
            model_id: "ada:ft-gdsc".into(),
            ..BackendConfig::mock(MockRule::default())
        },
        ..ServiceConfig::default()
    };
    let app = router(AppState::new(config).unwrap());
    let (status, _, body) = call(&app, get("/api/v1/config")).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["model_id"], "ada:ft-gdsc");
    assert_eq!(v["feature_set"], json!(["drug", "mutation"]));
    assert_eq!(
        v["serialization_order"],
        json!(["drug", "target", "cell_line", "smiles", "mutation"])
    );
    assert!(v.get("api_key").is_none() && v.get("api_key_env").is_none());

    // Fields outside the configured set are not serialized.
    let (_, _, body) = call(
        &app,
        post_json(json!({"drug": "x", "target": "egfr", "mutations": ["kras"]})),
    )
    .await;
    let resp: PredictResponse = serde_json::from_slice(&body).unwrap();
    assert!(resp
        .prompt
        .ends_with("The drug name is x. The gene mutation is kras. Drug response:"));
}

struct AlwaysDown;

impl CompletionBackend for AlwaysDown {
    fn complete(&self, _: &str) -> Result<String, BackendError> {
        Err(BackendError::Status {
            status: 503,
            body: "overloaded".into(),
        })
    }
}

#[tokio::test]
async fn exhausted_backend_is_502_with_retry_after() {
    let gw = Gateway::with_backend(
        Arc::new(AlwaysDown),
        "m",
        RetryPolicy {
            max_attempts: 2,
            base_backoff_ms: 0,
        },
    );
    let state = AppState::with_parts(ServiceConfig::default(), Ok(gw), ResponseCache::in_memory());
    let app = router(state);
    let (status, headers, _) = call(&app, post_json(json!({"drug": "x"}))).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(headers[header::RETRY_AFTER], "5");
}

#[tokio::test]
async fn cors_allows_configured_origin() {
    let app = crebbp_app();
    let req = Request::options("/api/v1/predict")
        .header(header::ORIGIN, "http://localhost:5173")
        .header(header::ACCESS_CONTROL_REQUEST_METHOD, "POST")
        .body(Body::empty())
        .unwrap();
    let (_, headers, _) = call(&app, req).await;
    assert_eq!(
        headers[header::ACCESS_CONTROL_ALLOW_ORIGIN],
        "http://localhost:5173"
    );

    let req = Request::get("/api/v1/health")
        .header(header::ORIGIN, "http://evil.example")
        .body(Body::empty())
        .unwrap();
    let (_, headers, _) = call(&app, req).await;
    assert!(headers.get(header::ACCESS_CONTROL_ALLOW_ORIGIN).is_none());
}
