use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use drugsense::cohort::Label;
use drugsense::gateway::{
    batch_predict, normalize_response, BackendError, BatchItem, CompletionBackend, Gateway,
    MockBackend, MockRule, Outcome, ResponseCache, RetryPolicy,
};
use proptest::prelude::*;

proptest! {
    #[test]
    fn normalize_is_total_and_idempotent(raw in "\\PC{0,40}") {
        let once = normalize_response(&raw);
        let lower = raw.to_lowercase();
        prop_assert_eq!(normalize_response(&lower), once);
        if once != Outcome::Unparseable {
            prop_assert_eq!(normalize_response(once.as_str()), once);
        }
    }

    #[test]
    fn earliest_keyword_wins(prefix in "[a-z ]{0,10}", sens_first in prop::bool::ANY) {
        let (a, b) = if sens_first { ("Sensitive", "resistant") } else { ("RESISTANT", "sensitive") };
        let text = format!("{prefix} {a} or {b}");
        let want = if sens_first { Outcome::Sensitive } else { Outcome::Resistant };
        prop_assert_eq!(normalize_response(&text), want);
    }
}

fn planted_rule() -> MockRule {
    MockRule::new(
        [
            ("tp53", Label::Resistant),
            ("crebbp", Label::Sensitive),
            ("egfr", Label::Sensitive),
        ],
        Label::Resistant,
    )
}

fn prompts(n: usize) -> Vec<String> {
    let genes = ["tp53", "crebbp", "egfr", "kras", "braf"];
    (0..n)
        .map(|i| {
            format!(
                "The drug name is d{}. The gene mutation is {}. Drug response:",
                i % 7,
                genes[i % genes.len()]
            )
        })
        .collect()
}

#[test]
fn batch_matches_sequential_hand_oracle() {
    let prompts = prompts(20);
    let backend = Arc::new(MockBackend::new(planted_rule()));
    let gw = Gateway::with_backend(backend, "mock", RetryPolicy::default());
    let out = batch_predict(&gw, &prompts, 4, &ResponseCache::in_memory());

    for (prompt, item) in prompts.iter().zip(&out.items) {
        let expected = if prompt.contains("tp53") {
            Outcome::Resistant
        } else if prompt.contains("crebbp") || prompt.contains("egfr") {
            Outcome::Sensitive
        } else {
            Outcome::Resistant
        };
        assert_eq!(item.prediction().unwrap().outcome, expected, "{prompt}");
    }
    assert!(out.failed.is_empty());
}

#[test]
fn parallel_equals_sequential_and_cache_stops_calls() {
    let prompts = prompts(50);
    let backend = Arc::new(MockBackend::new(planted_rule()));
    let gw = Gateway::with_backend(backend.clone(), "mock", RetryPolicy::default());

    let seq = batch_predict(&gw, &prompts, 1, &ResponseCache::in_memory());
    let unique = prompts
        .iter()
        .collect::<std::collections::HashSet<_>>()
        .len();
    assert_eq!(backend.calls(), unique);

    let cache = ResponseCache::in_memory();
    let par = batch_predict(&gw, &prompts, 4, &cache);
    assert_eq!(seq.items, par.items);
    let before = backend.calls();
    let again = batch_predict(&gw, &prompts, 4, &cache);
    assert_eq!(backend.calls(), before);
    assert_eq!(again.items, par.items);
}

#[test]
fn disk_cache_spans_runs() {
    let dir = tempfile::tempdir().unwrap();
    let prompts = prompts(10);
    let backend = Arc::new(MockBackend::new(planted_rule()));
    let gw = Gateway::with_backend(backend.clone(), "mock", RetryPolicy::default());
    let first = batch_predict(&gw, &prompts, 2, &ResponseCache::open(dir.path()).unwrap());
    let calls = backend.calls();
    let second = batch_predict(&gw, &prompts, 2, &ResponseCache::open(dir.path()).unwrap());
    assert_eq!(backend.calls(), calls);
    assert_eq!(second.backend_requests, 0);
    assert_eq!(first.items, second.items);
}

struct FailTwice(AtomicU32);

impl CompletionBackend for FailTwice {
    fn complete(&self, _: &str) -> Result<String, BackendError> {
        match self.0.fetch_add(1, Ordering::SeqCst) {
            0 => Err(BackendError::Timeout),
            1 => Err(BackendError::Status {
                status: 429,
                body: "slow down".into(),
            }),
            _ => Ok(" Sensitive".into()),
        }
    }
}

#[test]
fn fail_twice_then_succeed_takes_three_attempts() {
    let backend = Arc::new(FailTwice(AtomicU32::new(0)));
    let gw = Gateway::with_backend(
        backend.clone(),
        "m",
        RetryPolicy {
            max_attempts: 3,
            base_backoff_ms: 1,
        },
    );
    let out = batch_predict(&gw, &["p".to_string()], 1, &ResponseCache::in_memory());
    assert_eq!(backend.0.load(Ordering::SeqCst), 3);
    match &out.items[0] {
        BatchItem::Ok(p) => assert_eq!(p.outcome, Outcome::Sensitive),
        other => panic!("{other:?}"),
    }
}
