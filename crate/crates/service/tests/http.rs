use std::sync::{Arc, RwLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use evolad_core::data::{synth_stream, SynthConfig};
use evolad_service::{api, Service, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(dir: &std::path::Path) -> Router {
    let mut cfg = ServiceConfig {
        data_dir: dir.to_path_buf(),
        fsync: false,
        ..ServiceConfig::default()
    };
    cfg.detector.biased_init = false;
    cfg.detector.seed = 4;
    cfg.detector.max_iters = 500;
    api::router(Arc::new(RwLock::new(Service::open(cfg).unwrap())))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn epoch_body(n: usize) -> Value {
    let batch = &synth_stream::<f64>(&SynthConfig::default(), 1, 300).unwrap()[0];
    let records: Vec<Value> = batch.records[..n]
        .iter()
        .map(|r| json!({ "id": r.id, "values": r.values }))
        .collect();
    json!({ "records": records })
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn ingest_queue_label_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());

    let (s, v) = call(&app, "POST", "/v1/ingest", Some(epoch_body(150))).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    assert_eq!(v["buffered"], 150);
    assert_eq!(v["epochs_started"], json!([]));

    let (_, v) = call(&app, "GET", "/v1/weights", None).await;
    assert_eq!(v["epochs_fitted"], 0);
    assert!(v["snapshot"].as_str().unwrap().starts_with("evolad-weights v1"));

    let mut rest = epoch_body(300);
    rest["records"] = json!(rest["records"].as_array().unwrap()[150..].to_vec());
    let (s, v) = call(&app, "POST", "/v1/ingest", Some(rest)).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    assert_eq!(v["epochs_started"], json!([0]));

    let (s, page) = call(&app, "GET", "/v1/queue?status=pending&per_page=1000", None).await;
    assert_eq!(s, StatusCode::OK);
    let items = page["items"].as_array().unwrap().clone();
    assert!(!items.is_empty());
    assert_eq!(page["total"], items.len());
    assert_eq!(items[0]["attributes"].as_array().unwrap().len(), 20);
    assert_eq!(items[0]["status"], "pending");

    for (k, item) in items.iter().enumerate() {
        let (s, v) = call(&app, "POST", "/v1/labels", Some(json!({ "record_id": item["record_id"], "class": "normal" }))).await;
        assert_eq!(s, StatusCode::OK, "{v}");
        let done = v["epochs_completed"].as_array().unwrap().len();
        assert_eq!(done, usize::from(k + 1 == items.len()));
    }
    let (_, v) = call(&app, "GET", "/v1/queue?status=verified&page=0&per_page=5", None).await;
    assert_eq!(v["items"].as_array().unwrap().len(), 5.min(items.len()));

    let (_, m) = call(&app, "GET", "/v1/metrics", None).await;
    assert_eq!(m["epochs"], 1);
    assert_eq!(m["reports"][0]["flagged"], items.len());
    let (_, w) = call(&app, "GET", "/v1/weights", None).await;
    assert_eq!(w["epochs_fitted"], 1);

    let (_, f) = call(&app, "GET", "/v1/features?top_k=3", None).await;
    assert_eq!(f["entries"].as_array().unwrap().len(), 3);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn errors_carry_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    call(&app, "POST", "/v1/ingest", Some(epoch_body(300))).await;
    let (_, page) = call(&app, "GET", "/v1/queue", None).await;
    let id = page["items"][0]["record_id"].clone();

    let cases = [
        ("/v1/labels", json!({ "record_id": "ghost", "class": "cpu" }), 404, "unknown_record"),
        ("/v1/labels", json!({ "record_id": id, "class": "gpu" }), 422, "invalid_class"),
        ("/v1/labels", json!({ "record_id": id, "class": "cpu" }), 200, ""),
        ("/v1/labels", json!({ "record_id": id, "class": "disk" }), 409, "duplicate_verdict"),
        ("/v1/missed", json!({ "record_id": id, "class": "normal" }), 422, "normal_report"),
        ("/v1/labels", json!({ "record": id }), 400, "bad_request"),
    ];
    for (uri, body, status, code) in cases {
        let (s, v) = call(&app, "POST", uri, Some(body.clone())).await;
        assert_eq!(s.as_u16(), status, "{uri} {body}: {v}");
        if !code.is_empty() {
            assert_eq!(v["error"]["code"], code);
        }
    }

    let (s, v) = call(&app, "POST", "/v1/ingest", Some(json!({ "records": [{ "values": [0.1, 0.2] }] }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "schema_mismatch");
    assert_eq!(v["error"]["attribute"], "ldavg-1");

    let (s, v) = call(
        &app,
        "POST",
        "/v1/ingest",
        Some(json!({ "attributes": ["runq-sz", "load"], "records": [] })),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["attribute"], "load");

    let (s, _) = call(&app, "GET", "/v1/queue?status=weird", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn records_by_field_name() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let names = evolad_core::data::SAR_ATTRIBUTES;
    let mut fields = serde_json::Map::new();
    for n in names {
        fields.insert(n.to_string(), json!(0.5));
    }
    let (s, v) = call(&app, "POST", "/v1/ingest", Some(json!({ "records": [{ "fields": fields.clone() }] }))).await;
    assert_eq!(s, StatusCode::ACCEPTED, "{v}");
    let (_, st) = call(&app, "GET", "/v1/status", None).await;
    assert_eq!(st["buffered"], 1);

    fields.remove("tps");
    let (s, v) = call(&app, "POST", "/v1/ingest", Some(json!({ "records": [{ "id": "x", "fields": fields }] }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["attribute"], "tps");
}
