//! JSON API over [`Service`]. Every response body, errors included, carries
//! the active snapshot `version`.

use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use namelink_core::Variant;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ServiceError;
use crate::service::Service;

type Shared = State<Arc<Service>>;

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/api/documents", post(add_document))
        .route("/api/search", post(search))
        .route("/api/queries", post(submit))
        .route("/api/review/pending", get(pending))
        .route("/api/review/{id}/endorse", post(endorse))
        .route("/api/review/{id}/reject", post(reject))
        .route("/api/config/threshold", get(get_threshold).put(put_threshold))
        .route("/api/admin/retrain", post(retrain))
        .route("/api/metrics", get(metrics))
        .with_state(service)
}

fn status_of(err: &ServiceError) -> StatusCode {
    use namelink_core::Error as E;
    match err {
        ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
        ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
        ServiceError::Conflict(_) | ServiceError::Untrained(_) => StatusCode::CONFLICT,
        ServiceError::Core(E::DuplicateId(_)) => StatusCode::CONFLICT,
        ServiceError::Core(E::UnknownDocument(_)) => StatusCode::NOT_FOUND,
        ServiceError::Core(E::InvalidId(_) | E::Parameter(_) | E::CorpusTooSmall { .. }) => StatusCode::BAD_REQUEST,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

struct Reply(StatusCode, Value);

impl IntoResponse for Reply {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

fn ok<T: Serialize>(version: u64, status: StatusCode, body: T) -> Reply {
    let mut v = serde_json::to_value(body).unwrap_or(Value::Null);
    match &mut v {
        Value::Object(m) => {
            m.insert("version".into(), json!(version));
        }
        other => *other = json!({ "version": version, "data": other.take() }),
    }
    Reply(status, v)
}

fn fail(svc: &Service, err: ServiceError) -> Reply {
    Reply(
        status_of(&err),
        json!({ "version": svc.version(), "error": err.to_string() }),
    )
}

fn bad_body(svc: &Service, msg: String) -> Reply {
    fail(svc, ServiceError::BadRequest(msg))
}

async fn blocking<T, F>(svc: Arc<Service>, f: F) -> Result<T, ServiceError>
where
    F: FnOnce(&Service) -> Result<T, ServiceError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e.to_string())))?
}

#[derive(Deserialize)]
struct NewDocument {
    doc_id: String,
    name: String,
}

async fn add_document(State(svc): Shared, body: Result<Json<NewDocument>, JsonRejection>) -> Reply {
    let Json(doc) = match body {
        Ok(b) => b,
        Err(e) => return bad_body(&svc, e.body_text()),
    };
    let id = doc.doc_id.clone();
    match blocking(svc.clone(), move |s| s.ingest(&doc.doc_id, &doc.name)).await {
        Ok(version) => ok(version, StatusCode::CREATED, json!({ "doc_id": id })),
        Err(e) => fail(&svc, e),
    }
}

#[derive(Deserialize)]
struct SearchRequest {
    query: String,
    k: Option<usize>,
    variant: Option<String>,
}

#[derive(Serialize)]
struct Hit {
    doc_id: String,
    name: String,
    fraction: f64,
    probability: Option<f64>,
    breakdown: namelink_core::ScoreBreakdown,
}

async fn search(State(svc): Shared, body: Result<Json<SearchRequest>, JsonRejection>) -> Reply {
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return bad_body(&svc, e.body_text()),
    };
    let variant = match req.variant.as_deref().map(str::parse::<Variant>).transpose() {
        Ok(v) => v,
        Err(e) => return fail(&svc, e.into()),
    };
    match svc.search(&req.query, req.k, variant) {
        Ok((engine, results)) => {
            let variant = variant.unwrap_or(engine.default_variant());
            let hits: Vec<Hit> = results
                .into_iter()
                .map(|r| Hit {
                    doc_id: r.doc_id.to_string(),
                    name: engine.corpus().doc(r.doc_idx).raw().to_string(),
                    fraction: r.fraction,
                    probability: r.probability,
                    breakdown: r.breakdown,
                })
                .collect();
            ok(
                engine.version(),
                StatusCode::OK,
                json!({ "variant": variant, "results": hits }),
            )
        }
        Err(e) => fail(&svc, e),
    }
}

#[derive(Deserialize)]
struct SubmitRequest {
    query: String,
    k: Option<usize>,
}

async fn submit(State(svc): Shared, body: Result<Json<SubmitRequest>, JsonRejection>) -> Reply {
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return bad_body(&svc, e.body_text()),
    };
    match svc.submit_query(&req.query, req.k) {
        Ok((version, outcome)) => ok(version, StatusCode::OK, outcome),
        Err(e) => fail(&svc, e),
    }
}

async fn pending(State(svc): Shared) -> Reply {
    ok(svc.version(), StatusCode::OK, json!({ "items": svc.pending() }))
}

#[derive(Deserialize)]
struct EndorseRequest {
    doc_id: String,
}

async fn endorse(State(svc): Shared, Path(id): Path<u64>, body: Result<Json<EndorseRequest>, JsonRejection>) -> Reply {
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return bad_body(&svc, e.body_text()),
    };
    match svc.endorse(id, &req.doc_id) {
        Ok(item) => ok(svc.version(), StatusCode::OK, json!({ "item": item })),
        Err(e) => fail(&svc, e),
    }
}

async fn reject(State(svc): Shared, Path(id): Path<u64>) -> Reply {
    match svc.reject(id) {
        Ok(item) => ok(svc.version(), StatusCode::OK, json!({ "item": item })),
        Err(e) => fail(&svc, e),
    }
}

#[derive(Deserialize)]
struct Threshold {
    tt: f64,
}

async fn get_threshold(State(svc): Shared) -> Reply {
    ok(svc.version(), StatusCode::OK, json!({ "tt": svc.threshold() }))
}

async fn put_threshold(State(svc): Shared, body: Result<Json<Threshold>, JsonRejection>) -> Reply {
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return bad_body(&svc, e.body_text()),
    };
    match svc.set_threshold(req.tt) {
        Ok(tt) => ok(svc.version(), StatusCode::OK, json!({ "tt": tt })),
        Err(e) => fail(&svc, e),
    }
}

async fn retrain(State(svc): Shared) -> Reply {
    match blocking(svc.clone(), |s| s.retrain()).await {
        Ok(report) => ok(report.version, StatusCode::OK, report),
        Err(e) => fail(&svc, e),
    }
}

#[derive(Deserialize)]
struct MetricsQuery {
    tt: Option<f64>,
}

async fn metrics(State(svc): Shared, q: Result<Query<MetricsQuery>, QueryRejection>) -> Reply {
    let Query(q) = match q {
        Ok(q) => q,
        Err(e) => return bad_body(&svc, e.body_text()),
    };
    let version = svc.version();
    match blocking(svc.clone(), move |s| s.metrics(q.tt)).await {
        Ok(m) => ok(version, StatusCode::OK, m),
        Err(e) => fail(&svc, e),
    }
}

/// Serves the API until the process is stopped.
pub async fn serve(service: Arc<Service>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(service)).await
}
