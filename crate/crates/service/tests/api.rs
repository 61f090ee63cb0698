mod common;

use std::sync::Arc;

use axum::http::{Method, StatusCode};
use common::{app, call, config, corpus, trained_engine};
use namelink_core::{Corpus, Engine};
use namelink_service::{Service, ServiceConfig};
use serde_json::json;

fn service_with_tt(tt: f64) -> Arc<Service> {
    Arc::new(Service::new(trained_engine(), ServiceConfig { tt, ..config() }).unwrap())
}

fn first_name(c: &Corpus) -> (String, String) {
    let d = &c.documents()[0];
    (d.id().to_string(), d.raw().to_string())
}

#[tokio::test]
async fn search_returns_ranked_results_with_version() {
    let svc = service_with_tt(0.9);
    let app = app(&svc);
    let (id, name) = first_name(&corpus());
    let (status, body) = call(
        &app,
        Method::POST,
        "/api/search",
        Some(json!({ "query": name, "k": 3 })),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["version"], 1);
    assert_eq!(body["variant"], "tfidf+tr+bg");
    let results = body["results"].as_array().unwrap();
    assert!(!results.is_empty() && results.len() <= 3);
    assert_eq!(results[0]["doc_id"], id.as_str());
    assert_eq!(results[0]["fraction"], 1.0);
    assert!(results[0]["probability"].as_f64().unwrap() > 0.5);
    assert!(results[0]["breakdown"]["denominator"].as_f64().unwrap() > 0.0);

    // Variants without weights still rank, without probabilities.
    let (status, body) = call(
        &app,
        Method::POST,
        "/api/search",
        Some(json!({ "query": name, "variant": "tfidf" })),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert!(body["results"][0]["probability"].is_null());

    let (status, body) = call(
        &app,
        Method::POST,
        "/api/search",
        Some(json!({ "query": name, "variant": "bm25" })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["version"], 1);
    assert!(body["error"].as_str().unwrap().contains("bm25"));

    let (status, _) = call(
        &app,
        Method::POST,
        "/api/search",
        Some(json!({ "query": name, "k": 0 })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn malformed_bodies_get_json_errors() {
    let svc = service_with_tt(0.9);
    let app = app(&svc);
    let (status, body) = call(&app, Method::POST, "/api/queries", Some(json!({ "q": "x" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["version"], 1);
    assert!(body["error"].is_string());
    let (status, body) = call(&app, Method::GET, "/api/metrics?tt=abc", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].is_string());
}

#[tokio::test]
async fn threshold_splits_auto_and_review() {
    let (_, name) = first_name(&corpus());
    let svc = service_with_tt(0.0);
    let app = app(&svc);
    let (status, body) = call(&app, Method::POST, "/api/queries", Some(json!({ "query": name }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["outcome"], "auto_matched");
    assert_eq!(svc.label_records().len(), 1);

    let (status, body) = call(&app, Method::PUT, "/api/config/threshold", Some(json!({ "tt": 1.0 }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["tt"], 1.0);
    let (_, body) = call(&app, Method::POST, "/api/queries", Some(json!({ "query": name }))).await;
    assert_eq!(body["outcome"], "queued");
    assert!(!body["suggestions"].as_array().unwrap().is_empty());
    // Queued queries write no label until a reviewer acts.
    assert_eq!(svc.label_records().len(), 1);

    let (status, _) = call(&app, Method::PUT, "/api/config/threshold", Some(json!({ "tt": 1.5 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (_, body) = call(&app, Method::GET, "/api/config/threshold", None).await;
    assert_eq!(body["tt"], 1.0);
}

#[tokio::test]
async fn review_lifecycle() {
    let c = corpus();
    let (id, name) = first_name(&c);
    let other = c.documents()[1].id().to_string();
    let svc = service_with_tt(1.0);
    let app = app(&svc);

    let (_, a) = call(&app, Method::POST, "/api/queries", Some(json!({ "query": name }))).await;
    let (_, b) = call(
        &app,
        Method::POST,
        "/api/queries",
        Some(json!({ "query": "zzqx unmatched" })),
    )
    .await;
    let a = a["item_id"].as_u64().unwrap();
    let b = b["item_id"].as_u64().unwrap();
    let (_, pending) = call(&app, Method::GET, "/api/review/pending", None).await;
    assert_eq!(pending["items"].as_array().unwrap().len(), 2);
    assert_eq!(pending["items"][0]["state"], "pending");
    assert_eq!(pending["items"][0]["snapshot_version"], 1);

    let endorse = |item: u64| format!("/api/review/{item}/endorse");
    let (status, body) = call(&app, Method::POST, &endorse(a), Some(json!({ "doc_id": id }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["item"]["state"], "endorsed");
    assert_eq!(svc.label_records().len(), 1);
    assert_eq!(svc.label_records()[0].source, namelink_service::LabelSource::Expert);

    // Same endorsement again is a no-op.
    let (status, _) = call(&app, Method::POST, &endorse(a), Some(json!({ "doc_id": id }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(svc.label_records().len(), 1);

    let (status, _) = call(&app, Method::POST, &endorse(a), Some(json!({ "doc_id": other }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(
        &app,
        Method::POST,
        &endorse(b),
        Some(json!({ "doc_id": "no-such-doc" })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, Method::POST, &endorse(999), Some(json!({ "doc_id": id }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, Method::POST, &format!("/api/review/{a}/reject"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, body) = call(&app, Method::POST, &format!("/api/review/{b}/reject"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["item"]["state"], "rejected");
    assert_eq!(svc.label_records().len(), 1);
    let (status, _) = call(&app, Method::POST, &endorse(b), Some(json!({ "doc_id": id }))).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (_, pending) = call(&app, Method::GET, "/api/review/pending", None).await;
    assert!(pending["items"].as_array().unwrap().is_empty());

    let (_, m) = call(&app, Method::GET, "/api/metrics", None).await;
    assert_eq!(m["queue_depth"], 0);
    assert_eq!(m["labels"]["expert"], 1);
    assert_eq!(m["live"]["queued"], 2);
    assert_eq!(m["live"]["endorsed"], 1);
    assert_eq!(m["live"]["rejected"], 1);
    assert_eq!(m["live"]["automation_pct"], 0.0);
    assert_eq!(m["replay"]["queries"], 1);
    assert_eq!(m["replay"]["tt"], 1.0);
    let (_, m) = call(&app, Method::GET, "/api/metrics?tt=0", None).await;
    assert_eq!(m["replay"]["trusted"], 1);
}

#[tokio::test]
async fn untrained_engine_cannot_automate() {
    let engine = Engine::build(corpus(), 1).unwrap();
    let svc = Arc::new(Service::new(engine, config()).unwrap());
    let app = app(&svc);
    let (status, body) = call(&app, Method::POST, "/api/queries", Some(json!({ "query": "anything" }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(body["error"].as_str().unwrap().contains("weights"));
    let (status, _) = call(&app, Method::POST, "/api/search", Some(json!({ "query": "anything" }))).await;
    assert_eq!(status, StatusCode::OK);
    let (status, _) = call(&app, Method::POST, "/api/admin/retrain", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(svc.version(), 1);
}

#[tokio::test]
async fn ingest_publishes_a_new_snapshot() {
    let svc = service_with_tt(0.9);
    let app = app(&svc);
    let before = svc.engine();
    let (status, body) = call(
        &app,
        Method::POST,
        "/api/documents",
        Some(json!({ "doc_id": "new-1", "name": "Quuxly Frobnitz Holdings" })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["version"], 2);
    let after = svc.engine();
    assert_eq!(after.corpus().len(), before.corpus().len() + 1);
    assert_eq!(after.learned_trmap(), before.learned_trmap());
    assert_eq!(after.all_weights(), before.all_weights());
    // The old snapshot is untouched.
    assert_eq!(before.version(), 1);

    let (_, body) = call(
        &app,
        Method::POST,
        "/api/search",
        Some(json!({ "query": "frobnitz quuxly" })),
    )
    .await;
    assert_eq!(body["results"][0]["doc_id"], "new-1");
    assert_eq!(body["version"], 2);

    let (status, body) = call(
        &app,
        Method::POST,
        "/api/documents",
        Some(json!({ "doc_id": "new-1", "name": "x" })),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["version"], 2);
    let (status, _) = call(
        &app,
        Method::POST,
        "/api/documents",
        Some(json!({ "doc_id": "a\tb", "name": "x" })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn retrain_swaps_in_a_new_version() {
    let c = corpus();
    let svc = service_with_tt(1.0);
    let app = app(&svc);
    let (status, _) = call(&app, Method::POST, "/api/admin/retrain", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    for d in &c.documents()[..30] {
        let (_, body) = call(&app, Method::POST, "/api/queries", Some(json!({ "query": d.raw() }))).await;
        let item = body["item_id"].as_u64().unwrap();
        call(
            &app,
            Method::POST,
            &format!("/api/review/{item}/endorse"),
            Some(json!({ "doc_id": d.id().as_str() })),
        )
        .await;
    }
    let (status, body) = call(&app, Method::POST, "/api/admin/retrain", None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["version"], 2);
    assert_eq!(body["previous_version"], 1);
    assert_eq!(body["labels_used"], 30);
    assert_eq!(svc.version(), 2);
    assert!(svc.engine().weights(namelink_core::Variant::TfidfTrBg).is_some());

    // Without new labels a retrain changes nothing but the version.
    let first = svc.engine();
    call(&app, Method::POST, "/api/admin/retrain", None).await;
    let second = svc.engine();
    assert_eq!(second.version(), 3);
    assert_eq!(first.trmap(), second.trmap());
    assert_eq!(first.maxtr(), second.maxtr());
    assert_eq!(first.all_weights(), second.all_weights());
    assert_eq!(first.corpus().documents(), second.corpus().documents());
}
