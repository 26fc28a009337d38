mod common;

use std::collections::BTreeSet;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use epiportrait::api::{router, Shared, SNAPSHOT_HEADER};
use epiportrait_core::analytics::{Metric, SpanWindow};
use epiportrait_core::geometry::CountMode;
use epiportrait_core::json;
use epiportrait_core::temporal::Granularity;
use epiportrait_core::Level;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Reply {
    status: StatusCode,
    id: String,
    bytes: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap()
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let id = resp.headers().get(SNAPSHOT_HEADER).expect("snapshot header").to_str().unwrap().to_string();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, id, bytes }
}

async fn get(app: &Router, uri: &str) -> Reply {
    call(app, "GET", uri, None).await
}

fn setup() -> (Shared, Router) {
    let shared = Shared::new(common::engine(42, 10, 371));
    let app = router(shared.clone());
    (shared, app)
}

#[tokio::test]
async fn health_reports_snapshot() {
    let (shared, app) = setup();
    let r = get(&app, "/health").await;
    assert_eq!(r.status, StatusCode::OK);
    let id = shared.current().id().to_string();
    assert_eq!(r.json(), json!({ "status": "ok", "snapshot": id }));
    assert_eq!(r.id, id);
}

#[tokio::test]
async fn unknown_routes_are_json_404() {
    let (shared, app) = setup();
    let r = get(&app, "/no/such/thing").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["error"], 404);
    assert_eq!(r.id, shared.current().id());
}

#[tokio::test]
async fn portraits_equal_direct_calls() {
    let (shared, app) = setup();
    let engine = shared.current();
    assert_eq!(engine.grid(Granularity::Weekly).len(), 53);
    let r = get(&app, "/portraits?granularity=weekly&mode=per_10k&from=0&to=52").await;
    assert_eq!(r.status, StatusCode::OK);
    let direct = engine
        .portraits(Granularity::Weekly, CountMode::Per10k, SpanWindow::checked(0, 52, 53).unwrap())
        .unwrap();
    assert_eq!(r.json().as_array().unwrap().len(), 10);
    assert_eq!(r.bytes, json::to_vec(&direct).unwrap());
    let again = get(&app, "/portraits?granularity=weekly&mode=per_10k&from=0&to=52").await;
    assert_eq!(again.bytes, r.bytes);

    let windowed = get(&app, "/portraits?from=10&to=19").await.json();
    let first = &windowed[0]["proteins"];
    assert_eq!(first.as_array().unwrap().len(), 10);
    assert_eq!(first[0]["x"], 10);
    assert_eq!(get(&app, "/portraits?from=0&to=53").await.status, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/portraits?mode=per_100").await.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn full_brush_keeps_everyone() {
    let (_, app) = setup();
    let mdc = get(&app, "/mdc").await.json();
    let axes = mdc["axes"].as_array().unwrap();
    assert_eq!(axes.len(), 13);
    let intervals: serde_json::Map<String, Value> = axes.iter().map(|a| (a.as_str().unwrap().to_string(), json!([0.0, 1.0]))).collect();
    let r = call(&app, "POST", "/brush", Some(json!({ "intervals": intervals }))).await;
    assert_eq!(r.status, StatusCode::OK);
    let codes: BTreeSet<String> = serde_json::from_value(r.json()["codes"].clone()).unwrap();
    let all: BTreeSet<String> = mdc["rows"].as_array().unwrap().iter().map(|row| row["code"].as_str().unwrap().to_string()).collect();
    assert_eq!(codes, all);

    let r = call(&app, "POST", "/brush", Some(json!({ "intervals": { "total_cases": [0.9, 0.1] } }))).await;
    assert_eq!(r.json()["codes"], json!([]));
    let r = call(&app, "POST", "/brush", Some(json!({ "intervals": { "nope": [0.0, 1.0] } }))).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let r = call(&app, "POST", "/brush", Some(json!({ "wrong": 1 }))).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["error"], 400);
}

#[tokio::test]
async fn analytics_endpoints_match_engine() {
    let (shared, app) = setup();
    let e = shared.current();
    let win = SpanWindow::checked(3, 20, 53).unwrap();
    for metric in Metric::all() {
        let r = get(&app, &format!("/rankings?metric={metric}&from=3&to=20")).await;
        assert_eq!(r.bytes, json::to_vec(&e.rankings(metric, Granularity::Weekly, win)).unwrap());
    }
    let r = get(&app, "/heatmap?level=postal_area&from=3&to=20").await;
    assert_eq!(r.bytes, json::to_vec(&e.heatmap(Level::PostalArea, Granularity::Weekly, win)).unwrap());
    assert_eq!(r.json()["cells"].as_array().unwrap().len(), 20);
    let r = get(&app, "/mdc?granularity=fortnightly&from=1&to=5").await;
    let fw = SpanWindow::checked(1, 5, 27).unwrap();
    assert_eq!(r.bytes, json::to_vec(&e.mdc(Granularity::Fortnightly, fw)).unwrap());
}

#[tokio::test]
async fn grid_translates_dates() {
    let (_, app) = setup();
    let g = get(&app, "/grid?granularity=weekly&date=2020-01-15").await.json();
    assert_eq!(g["spans"].as_array().unwrap().len(), 53);
    assert_eq!(g["index_of_date"], 2);
    assert_eq!(g["spans"][2]["start"], "2020-01-15");
    let g = get(&app, "/grid?granularity=fortnightly&date=1999-01-01").await.json();
    assert_eq!(g["index_of_date"], Value::Null);
    assert_eq!(get(&app, "/grid?granularity=monthly").await.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn search_and_communities() {
    let (_, app) = setup();
    let hits = get(&app, "/search?q=b&level=lga").await.json();
    let names: Vec<&str> = hits.as_array().unwrap().iter().map(|h| h["name"].as_str().unwrap()).collect();
    assert!(!names.is_empty());
    assert!(names.iter().all(|n| n.to_lowercase().contains('b')));
    let c = get(&app, "/communities?level=postal_area").await.json();
    assert_eq!(c.as_array().unwrap().len(), 20);
    let b = get(&app, "/boundaries?level=lga").await.json();
    assert_eq!(b["type"], "FeatureCollection");
    assert_eq!(b["features"].as_array().unwrap().len(), 10);
}

#[tokio::test]
async fn filter_trigger_has_one_bar_per_span() {
    let (_, app) = setup();
    let t = get(&app, "/filter_trigger?granularity=fortnightly").await.json();
    assert_eq!(t["code"], "state");
    assert_eq!(t["proteins"].as_array().unwrap().len(), 27);
    assert!(t["proteins"].as_array().unwrap().iter().all(|p| p["kind"] == "E"));
}

#[tokio::test]
async fn layout_respects_pins() {
    let (shared, app) = setup();
    let code = shared.current().dataset().communities().keys().next().unwrap().clone();
    let r = call(
        &app,
        "POST",
        "/layout?seed=5&viewport_w=2000&viewport_h=2000",
        Some(json!({ "pins": [{ "code": code, "x": 12.5, "y": -30.25 }] })),
    )
    .await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    assert_eq!(v["converged"], true);
    let b = &v["bodies"][0];
    assert_eq!((b["code"].as_str().unwrap(), b["x"].as_f64().unwrap(), b["y"].as_f64().unwrap()), (code.as_str(), 12.5, -30.25));
    assert_eq!(b["pinned"], true);
    let again = call(
        &app,
        "POST",
        "/layout?seed=5&viewport_w=2000&viewport_h=2000",
        Some(json!({ "pins": [{ "code": code, "x": 12.5, "y": -30.25 }] })),
    )
    .await;
    assert_eq!(again.bytes, r.bytes);

    let auto = get(&app, "/layout?seed=1").await;
    assert_eq!(auto.json()["converged"], true);
    let r = call(&app, "POST", "/layout", Some(json!({ "pins": [{ "code": "missing", "x": 0, "y": 0 }] }))).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    let r = get(&app, "/layout?viewport_w=10&viewport_h=10").await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(r.json()["message"].as_str().unwrap().contains("zoom out"));
}

#[tokio::test]
async fn swapping_snapshots_changes_the_id() {
    let (shared, app) = setup();
    let before = get(&app, "/health").await.id;
    shared.replace(common::engine(43, 10, 371));
    let after = get(&app, "/health").await;
    assert_ne!(before, after.id);
    assert_eq!(after.json()["snapshot"], after.id);
}
