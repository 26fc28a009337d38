//! HTTP routes over the current engine.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use axum::extract::{Query, State};
use axum::http::{header, HeaderValue, StatusCode, Uri};
use axum::middleware;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use epiportrait_core::analytics::Metric;
use epiportrait_core::geometry::CountMode;
use epiportrait_core::temporal::Granularity;
use epiportrait_core::{json, Level};
use serde::Deserialize;
use serde_json::json;

use crate::engine::{Engine, LayoutQuery, Pin, QueryError};

pub const SNAPSHOT_HEADER: &str = "x-snapshot-id";

/// The engine currently served. Replacing it is a single pointer swap;
/// requests already running keep the engine they started with.
#[derive(Clone)]
pub struct Shared(Arc<RwLock<Arc<Engine>>>);

impl Shared {
    pub fn new(engine: Engine) -> Self {
        Self(Arc::new(RwLock::new(Arc::new(engine))))
    }

    pub fn current(&self) -> Arc<Engine> {
        self.0.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn replace(&self, engine: Engine) {
        *self.0.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(engine);
    }
}

pub fn router(shared: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/summary", get(summary))
        .route("/grid", get(grid))
        .route("/communities", get(communities))
        .route("/search", get(search))
        .route("/portraits", get(portraits))
        .route("/filter_trigger", get(filter_trigger))
        .route("/layout", get(layout_get).post(layout_post))
        .route("/heatmap", get(heatmap))
        .route("/rankings", get(rankings))
        .route("/mdc", get(mdc))
        .route("/brush", axum::routing::post(brush))
        .route("/boundaries", get(boundaries))
        .fallback(not_found)
        .layer(middleware::map_response_with_state(shared.clone(), tag_response))
        .with_state(shared)
}

/// Covers responses produced before a handler ran, such as body rejections.
async fn tag_response(State(s): State<Shared>, mut resp: Response) -> Response {
    if !resp.headers().contains_key(SNAPSHOT_HEADER) {
        let id = HeaderValue::from_str(s.current().id()).expect("hex id");
        resp.headers_mut().insert(SNAPSHOT_HEADER, id);
    }
    resp
}

struct ApiError(StatusCode, String);

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        let status = match e {
            QueryError::BadRequest(_) => StatusCode::BAD_REQUEST,
            QueryError::NotFound(_) => StatusCode::NOT_FOUND,
            QueryError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError(status, e.to_string())
    }
}

fn bad(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

/// Serializes with 17 significant digits and tags the snapshot id.
fn reply<T: serde::Serialize>(engine: &Engine, result: Result<T, ApiError>) -> Response {
    let (status, body) = match result {
        Ok(v) => (StatusCode::OK, json::to_vec(&v)),
        Err(ApiError(status, message)) => (status, json::to_vec(&json!({ "error": status.as_u16(), "message": message }))),
    };
    let body = body.expect("response serializes");
    let mut resp = (status, body).into_response();
    let headers = resp.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
    headers.insert(SNAPSHOT_HEADER, HeaderValue::from_str(engine.id()).expect("hex id"));
    resp
}

fn parse<T: std::str::FromStr>(name: &str, value: Option<&str>, default: T) -> Result<T, ApiError>
where
    T::Err: std::fmt::Display,
{
    match value {
        None | Some("") => Ok(default),
        Some(v) => v.parse().map_err(|e| bad(format!("{name}: {e}"))),
    }
}

#[derive(Debug, Default, Deserialize)]
struct Params {
    granularity: Option<String>,
    level: Option<String>,
    mode: Option<String>,
    from: Option<String>,
    to: Option<String>,
    metric: Option<String>,
    q: Option<String>,
    seed: Option<String>,
    viewport_w: Option<String>,
    viewport_h: Option<String>,
    date: Option<String>,
}

fn opt<T: std::str::FromStr>(name: &str, value: &Option<String>) -> Result<Option<T>, ApiError>
where
    T::Err: std::fmt::Display,
{
    match value.as_deref() {
        None | Some("") => Ok(None),
        Some(v) => v.parse().map(Some).map_err(|e| bad(format!("{name}: {e}"))),
    }
}

impl Params {
    fn granularity(&self) -> Result<Granularity, ApiError> {
        parse("granularity", self.granularity.as_deref(), Granularity::Weekly)
    }

    fn level(&self) -> Result<Level, ApiError> {
        parse("level", self.level.as_deref(), Level::Lga)
    }

    fn mode(&self) -> Result<CountMode, ApiError> {
        parse("mode", self.mode.as_deref(), CountMode::Actual)
    }

    fn window(&self, engine: &Engine) -> Result<epiportrait_core::analytics::SpanWindow, ApiError> {
        Ok(engine.window(self.granularity()?, opt("from", &self.from)?, opt("to", &self.to)?)?)
    }

    fn layout(&self, pins: Vec<Pin>) -> Result<LayoutQuery, ApiError> {
        let viewport = match (opt::<f64>("viewport_w", &self.viewport_w)?, opt::<f64>("viewport_h", &self.viewport_h)?) {
            (Some(w), Some(h)) => Some([w, h]),
            (None, None) => None,
            _ => return Err(bad("viewport_w and viewport_h go together")),
        };
        Ok(LayoutQuery {
            granularity: self.granularity()?,
            mode: self.mode()?,
            from: opt("from", &self.from)?,
            to: opt("to", &self.to)?,
            seed: opt("seed", &self.seed)?.unwrap_or(0),
            viewport,
            pins,
        })
    }
}

type Q = Query<Params>;

async fn health(State(s): State<Shared>) -> Response {
    let e = s.current();
    reply(&e, Ok(json!({ "status": "ok", "snapshot": e.id() })))
}

async fn summary(State(s): State<Shared>) -> Response {
    let e = s.current();
    reply(&e, Ok(e.summary()))
}

async fn grid(State(s): State<Shared>, Query(p): Q) -> Response {
    let e = s.current();
    let result = (|| {
        let g = p.granularity()?;
        let grid = e.grid(g);
        let index = match p.date.as_deref() {
            None => None,
            Some(d) => {
                let date: chrono::NaiveDate = d.parse().map_err(|err| bad(format!("date: {err}")))?;
                Some(grid.span_of(date))
            }
        };
        Ok(json!({
            "granularity": g,
            "window": grid.window,
            "spans": grid.spans,
            "index_of_date": index.flatten(),
        }))
    })();
    reply(&e, result)
}

async fn communities(State(s): State<Shared>, Query(p): Q) -> Response {
    let e = s.current();
    reply(&e, p.level().map(|l| e.communities(l)))
}

async fn search(State(s): State<Shared>, Query(p): Q) -> Response {
    let e = s.current();
    reply(&e, p.level().map(|l| e.search(p.q.as_deref().unwrap_or(""), l)))
}

async fn portraits(State(s): State<Shared>, Query(p): Q) -> Response {
    let e = s.current();
    let result = (|| Ok(e.portraits(p.granularity()?, p.mode()?, p.window(&e)?)?))();
    reply(&e, result)
}

async fn filter_trigger(State(s): State<Shared>, Query(p): Q) -> Response {
    let e = s.current();
    reply(&e, p.granularity().map(|g| e.filter_trigger(g)))
}

#[derive(Debug, Default, Deserialize)]
struct LayoutBodyJson {
    #[serde(default)]
    pins: Vec<Pin>,
}

async fn layout_get(State(s): State<Shared>, Query(p): Q) -> Response {
    let e = s.current();
    let result = (|| Ok(e.layout(&p.layout(Vec::new())?)?))();
    reply(&e, result)
}

async fn layout_post(State(s): State<Shared>, Query(p): Q, body: Option<Json<LayoutBodyJson>>) -> Response {
    let e = s.current();
    let pins = body.map(|Json(b)| b.pins).unwrap_or_default();
    let result = (|| Ok(e.layout(&p.layout(pins)?)?))();
    reply(&e, result)
}

async fn heatmap(State(s): State<Shared>, Query(p): Q) -> Response {
    let e = s.current();
    let result = (|| Ok(e.heatmap(p.level()?, p.granularity()?, p.window(&e)?)))();
    reply(&e, result)
}

async fn rankings(State(s): State<Shared>, Query(p): Q) -> Response {
    let e = s.current();
    let result = (|| {
        let metric: Metric = parse("metric", p.metric.as_deref(), Metric::TotalCases)?;
        Ok(e.rankings(metric, p.granularity()?, p.window(&e)?))
    })();
    reply(&e, result)
}

async fn mdc(State(s): State<Shared>, Query(p): Q) -> Response {
    let e = s.current();
    let result = (|| Ok(e.mdc(p.granularity()?, p.window(&e)?)))();
    reply(&e, result)
}

#[derive(Debug, Deserialize)]
struct BrushRequest {
    intervals: BTreeMap<String, (f64, f64)>,
}

async fn brush(State(s): State<Shared>, Query(p): Q, body: Result<Json<BrushRequest>, axum::extract::rejection::JsonRejection>) -> Response {
    let e = s.current();
    let result = (|| {
        let Json(req) = body.map_err(|r| bad(r.body_text()))?;
        let codes = e.brush(p.granularity()?, p.window(&e)?, &req.intervals)?;
        Ok(json!({ "codes": codes }))
    })();
    reply(&e, result)
}

async fn boundaries(State(s): State<Shared>, Query(p): Q) -> Response {
    let e = s.current();
    let result = (|| Ok(e.boundaries(p.level()?)?))();
    reply(&e, result)
}

async fn not_found(State(s): State<Shared>, uri: Uri) -> Response {
    let e = s.current();
    reply::<()>(&e, Err(ApiError(StatusCode::NOT_FOUND, format!("no route for {}", uri.path()))))
}
