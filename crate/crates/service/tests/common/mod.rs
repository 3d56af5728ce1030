#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::{TimeZone, Utc};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use threadtrace_core::fixtures::counter_exercise;
use threadtrace_service::api::Service;
use threadtrace_service::log::{AttemptLog, ManualClock};
use threadtrace_service::store::ExerciseStore;

pub fn shipped_data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn clock() -> Arc<ManualClock> {
    Arc::new(ManualClock::new(
        Utc.with_ymd_and_hms(2026, 3, 1, 9, 0, 0).unwrap(),
    ))
}

pub fn memory_service(clock: Arc<ManualClock>) -> Arc<Service> {
    Arc::new(Service::new(
        ExerciseStore::new([counter_exercise()]),
        AttemptLog::in_memory(),
        clock,
        7,
    ))
}

pub async fn call(
    router: &Router,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Value, Vec<u8>) {
    let builder = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(b) => builder
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => builder.body(Body::empty()).unwrap(),
    };
    let response = router.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    let json = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, json, bytes)
}

/// Every object key anywhere in `v`.
pub fn keys(v: &Value) -> Vec<String> {
    let mut out = Vec::new();
    fn walk(v: &Value, out: &mut Vec<String>) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    out.push(k.clone());
                    walk(x, out);
                }
            }
            Value::Array(a) => a.iter().for_each(|x| walk(x, out)),
            _ => {}
        }
    }
    walk(v, &mut out);
    out
}

/// Keys that would give away an answer before it is earned.
pub const ANSWER_KEYS: [&str; 6] = [
    "correctChoiceIndex",
    "correctSchedule",
    "retrievalUpdateOrder",
    "expected",
    "correctChoices",
    "fillIn",
];

pub fn assert_no_answer_keys(v: &Value) {
    let found: Vec<String> = keys(v)
        .into_iter()
        .filter(|k| ANSWER_KEYS.contains(&k.as_str()))
        .collect();
    assert!(found.is_empty(), "answer keys leaked: {found:?} in {v}");
}
