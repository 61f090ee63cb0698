#![allow(dead_code)]

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use namelink_core::{
    generate_pairs, Corpus, Engine, EngineConfig, EquivalenceTable, GenParams, IndexSnapshot, LabeledPair, Variant,
};
use namelink_service::{router, Service, ServiceConfig};
use serde_json::Value;
use tower::ServiceExt;

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/data")
        .join(name)
}

pub fn corpus() -> Corpus {
    let path = data("names_1000.tsv");
    Corpus::read_tsv(BufReader::new(File::open(&path).unwrap()), &path.display().to_string()).unwrap()
}

pub fn equivalences() -> EquivalenceTable {
    let path = data("equivalences.tsv");
    EquivalenceTable::read_tsv(BufReader::new(File::open(&path).unwrap()), &path.display().to_string()).unwrap()
}

pub fn pairs(corpus: &Corpus, seed: u64, mu: f64) -> Vec<LabeledPair> {
    let index = IndexSnapshot::build(corpus).unwrap();
    let params = GenParams {
        seed,
        mu,
        ..GenParams::default()
    };
    generate_pairs(corpus, &index, &params, &equivalences()).unwrap()
}

pub fn config() -> ServiceConfig {
    ServiceConfig {
        engine: EngineConfig {
            fit_variants: vec![Variant::TfidfTrBg],
            ..EngineConfig::default()
        },
        ..ServiceConfig::default()
    }
}

/// An engine trained on generated pairs over the name fixture.
pub fn trained_engine() -> Engine {
    let c = corpus();
    let pls = pairs(&c, 7, 2.0);
    Engine::train(c, &pls, &config().engine, 1).unwrap().0
}

pub fn app(service: &Arc<Service>) -> Router {
    router(service.clone())
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let builder = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => builder
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => builder.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let json = serde_json::from_slice(&bytes)
        .unwrap_or_else(|_| panic!("non-JSON body: {:?}", String::from_utf8_lossy(&bytes)));
    (status, json)
}
