//! `/v1` HTTP+JSON routes.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use evolad_core::Record64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::engine::{ItemStatus, QueueItem};
use crate::error::ServiceError;
use crate::service::Service;

pub type Shared = Arc<RwLock<Service>>;

pub struct ApiError(pub ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let mut error = json!({ "code": self.0.code(), "message": self.0.to_string() });
        if let ServiceError::Schema { attribute: Some(a), .. } = &self.0 {
            error["attribute"] = json!(a);
        }
        (status, Json(json!({ "error": error }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(ServiceError::BadRequest(e.to_string())))
}

/// Runs `f` under the write lock, off the async workers: epoch fits can
/// take seconds.
async fn with_service<T, F>(state: &Shared, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&mut Service) -> Result<T, ServiceError> + Send + 'static,
{
    let state = state.clone();
    tokio::task::spawn_blocking(move || {
        let mut guard = state.write().unwrap_or_else(|p| p.into_inner());
        f(&mut guard)
    })
    .await
    .map_err(|e| ApiError(ServiceError::BadRequest(format!("worker failed: {e}"))))?
    .map_err(ApiError)
}

async fn read_service<T, F>(state: &Shared, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Service) -> Result<T, ServiceError> + Send + 'static,
{
    let state = state.clone();
    tokio::task::spawn_blocking(move || {
        let guard = state.read().unwrap_or_else(|p| p.into_inner());
        f(&guard)
    })
    .await
    .map_err(|e| ApiError(ServiceError::BadRequest(format!("worker failed: {e}"))))?
    .map_err(ApiError)
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/v1/status", get(status))
        .route("/v1/ingest", post(ingest))
        .route("/v1/queue", get(queue))
        .route("/v1/labels", post(labels))
        .route("/v1/missed", post(missed))
        .route("/v1/metrics", get(metrics))
        .route("/v1/weights", get(weights))
        .route("/v1/features", get(features))
        .with_state(state)
}

async fn status(State(s): State<Shared>) -> ApiResult<crate::engine::Status> {
    read_service(&s, |svc| Ok(svc.engine().status())).await.map(Json)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IngestRecord {
    id: Option<String>,
    /// In schema order.
    values: Option<Vec<f64>>,
    /// By attribute name.
    fields: Option<HashMap<String, f64>>,
    timestamp: Option<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IngestBody {
    /// Optional header naming the columns of `values`.
    attributes: Option<Vec<String>>,
    records: Vec<IngestRecord>,
}

fn schema_error(message: String, attribute: Option<&str>) -> ServiceError {
    ServiceError::Schema {
        message,
        attribute: attribute.map(str::to_owned),
    }
}

fn to_records(body: IngestBody, schema: &[String], first_number: usize) -> Result<Vec<Record64>, ServiceError> {
    if let Some(header) = &body.attributes {
        for j in 0..header.len().max(schema.len()) {
            match (header.get(j), schema.get(j)) {
                (Some(h), Some(s)) if h == s => {}
                (Some(h), Some(s)) => {
                    return Err(schema_error(format!("column {j} is `{h}`, schema expects `{s}`"), Some(h)))
                }
                (Some(h), None) => return Err(schema_error(format!("unexpected attribute `{h}`"), Some(h))),
                (None, Some(s)) => return Err(schema_error(format!("missing attribute `{s}`"), Some(s))),
                (None, None) => unreachable!(),
            }
        }
    }
    body.records
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let id = r.id.unwrap_or_else(|| format!("rec-{}", first_number + i + 1));
            let values = match (r.values, r.fields) {
                (Some(v), None) => v,
                (None, Some(mut f)) => {
                    let values = schema
                        .iter()
                        .map(|a| {
                            f.remove(a).ok_or_else(|| {
                                schema_error(format!("record `{id}` lacks attribute `{a}`"), Some(a))
                            })
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    if let Some(extra) = f.keys().min() {
                        return Err(schema_error(format!("record `{id}` has unknown attribute `{extra}`"), Some(extra)));
                    }
                    values
                }
                _ => {
                    return Err(ServiceError::BadRequest(format!(
                        "record `{id}` needs exactly one of `values` or `fields`"
                    )))
                }
            };
            let mut record = Record64::new(id, values);
            record.timestamp = r.timestamp;
            Ok(record)
        })
        .collect()
}

async fn ingest(State(s): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let body: IngestBody = parse(&body)?;
    let out = with_service(&s, move |svc| {
        let records = to_records(body, svc.engine().attributes(), svc.engine().ingested())?;
        svc.ingest(records)
    })
    .await?;
    Ok((StatusCode::ACCEPTED, Json(out)).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QueueQuery {
    status: Option<String>,
    page: Option<usize>,
    per_page: Option<usize>,
}

#[derive(Debug, Serialize)]
struct QueueItemView {
    #[serde(flatten)]
    item: QueueItem,
    attributes: Vec<String>,
}

#[derive(Debug, Serialize)]
struct QueuePage {
    items: Vec<QueueItemView>,
    total: usize,
    page: usize,
    per_page: usize,
}

async fn queue(State(s): State<Shared>, Query(q): Query<QueueQuery>) -> ApiResult<QueuePage> {
    let filter = match q.status.as_deref().unwrap_or("pending") {
        "all" => None,
        "pending" => Some(ItemStatus::Pending),
        "verified" => Some(ItemStatus::Verified),
        "expired" => Some(ItemStatus::Expired),
        other => {
            return Err(ApiError(ServiceError::BadRequest(format!(
                "status must be pending, verified, expired or all, not `{other}`"
            ))))
        }
    };
    let page = q.page.unwrap_or(0);
    let per_page = q.per_page.unwrap_or(50).clamp(1, 1000);
    read_service(&s, move |svc| {
        let engine = svc.engine();
        let matching: Vec<&QueueItem> = engine
            .queue()
            .iter()
            .filter(|i| filter.is_none_or(|f| i.status == f))
            .collect();
        let items = matching
            .iter()
            .skip(page * per_page)
            .take(per_page)
            .map(|&item| QueueItemView {
                item: item.clone(),
                attributes: engine.attributes().to_vec(),
            })
            .collect();
        Ok(QueuePage {
            items,
            total: matching.len(),
            page,
            per_page,
        })
    })
    .await
    .map(Json)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelBody {
    record_id: String,
    class: String,
}

async fn labels(State(s): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let b: LabelBody = parse(&body)?;
    let out = with_service(&s, move |svc| svc.verdict(&b.record_id, &b.class)).await?;
    Ok(Json(out).into_response())
}

async fn missed(State(s): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let b: LabelBody = parse(&body)?;
    let id = b.record_id.clone();
    with_service(&s, move |svc| svc.missed(&b.record_id, &b.class)).await?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "record_id": id, "queued": true }))).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RangeQuery {
    from: Option<usize>,
    to: Option<usize>,
}

async fn metrics(State(s): State<Shared>, Query(q): Query<RangeQuery>) -> Result<Response, ApiError> {
    let body = read_service(&s, move |svc| {
        let reports = svc.engine().reports();
        let to = q.to.unwrap_or(reports.len()).min(reports.len());
        let from = q.from.unwrap_or(0).min(to);
        let status = svc.engine().status();
        Ok(json!({
            "reports": &reports[from..to],
            "labeled_fraction": status.labeled_fraction,
            "epochs": reports.len(),
        }))
    })
    .await?;
    Ok(Json(body).into_response())
}

async fn weights(State(s): State<Shared>) -> Result<Response, ApiError> {
    let body = read_service(&s, |svc| {
        Ok(json!({
            "epochs_fitted": svc.engine().reports().len(),
            "snapshot": svc.engine().weights(),
        }))
    })
    .await?;
    Ok(Json(body).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeaturesQuery {
    top_k: Option<usize>,
}

async fn features(State(s): State<Shared>, Query(q): Query<FeaturesQuery>) -> Result<Response, ApiError> {
    let k = q.top_k.unwrap_or(10);
    let ranking = read_service(&s, move |svc| Ok(svc.engine().ranking()?.truncated(k))).await?;
    Ok(Json(ranking).into_response())
}
