//! JSON/HTTP service over one document.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::RwLock;

use mcf_core::revision::{self, Binding};
use mcf_core::rules::compile;
use mcf_core::{
    display_value, format_rules, parse_rules, Action, Applied, BlankPolicy, Document, Error, ErrorClass, Region,
};

use crate::parse_evidence_map;

/// The document being served and, optionally, the file it is saved to
/// after every mutation.
pub struct Store {
    pub doc: Document,
    pub path: Option<PathBuf>,
}

pub type Shared = Arc<RwLock<Store>>;

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(Error::Schema {
            path: "body".into(),
            reason: e.body_text(),
        })
    }
}

pub fn status(e: &Error) -> StatusCode {
    match e.class() {
        ErrorClass::Validation => StatusCode::BAD_REQUEST,
        ErrorClass::NotFound => StatusCode::NOT_FOUND,
        ErrorClass::Conflict => StatusCode::CONFLICT,
        ErrorClass::Io => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "code": self.0.code(),
            "message": self.0.to_string(),
            "path": self.0.path(),
        });
        (status(&self.0), Json(body)).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

pub fn router(store: Shared) -> Router {
    Router::new()
        .route("/api/tables", get(list_tables))
        .route("/api/tables/:id", get(get_table))
        .route("/api/tables/:id/cells", get(get_cells).post(override_cell))
        .route("/api/tables/:id/region", post(region))
        .route("/api/tables/:id/corners", post(edit_corner))
        .route("/api/tables/:id/derive", post(derive))
        .route("/api/tables/:id/interpolator", post(swap))
        .route("/api/tables/:id/diff", get(diff))
        .route("/api/rules/parse", post(parse))
        .route("/api/evaluate", post(evaluate))
        .route("/api/journal", get(journal))
        .route("/api/journal/:entry/revert", post(revert))
        .with_state(store)
}

pub async fn serve(store: Store, bind: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(RwLock::new(store)))).await
}

fn shape(t: &mcf_core::CombiningTable) -> Vec<usize> {
    t.shape()
}

async fn list_tables(State(store): State<Shared>) -> ApiResult {
    let store = store.read().await;
    let tables: Vec<Value> = store
        .doc
        .library
        .tables
        .values()
        .map(|t| json!({"id": t.id(), "shape": shape(t), "conclusion": t.conclusion()}))
        .collect();
    Ok(Json(json!({"head": store.doc.head(), "tables": tables})))
}

async fn get_table(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult {
    let store = store.read().await;
    let t = store.doc.table(&id)?;
    Ok(Json(json!({
        "id": t.id(),
        "head": store.doc.head(),
        "shape": shape(t),
        "axes": t.axes(),
        "conclusion": t.conclusion(),
        "conclusion_scale": t.conclusion_scale(),
        "binding": store.doc.binding(&id),
    })))
}

async fn get_cells(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult {
    let store = store.read().await;
    let t = store.doc.table(&id)?;
    let cells: Vec<Value> = t
        .indices()
        .zip(t.cells())
        .map(|(index, cell)| {
            let mut v = serde_json::to_value(cell).expect("cell serializes");
            v["index"] = json!(index);
            if let Some(x) = cell.value() {
                v["display"] = json!(display_value(x));
            }
            v
        })
        .collect();
    Ok(Json(json!({
        "id": t.id(),
        "head": store.doc.head(),
        "shape": shape(t),
        "levels": t.axes().iter().map(|a| a.levels()).collect::<Vec<_>>(),
        "cells": cells,
    })))
}

fn mutation(applied: Applied, head: u64) -> Value {
    let mut v = json!({"entry": applied.entry, "head": head});
    if let Some(w) = applied.warning {
        v["warning"] = json!(w);
    }
    v
}

/// Runs one action under the write lock, persisting on success.
async fn commit(store: &Shared, table: &str, head: Option<u64>, action: Action, author: Option<String>) -> ApiResult {
    let mut store = store.write().await;
    store.doc.check_head(head)?;
    let applied = store.doc.execute(table, action, author.as_deref().unwrap_or("api"))?;
    persist(&store)?;
    Ok(Json(mutation(applied, store.doc.head())))
}

/// Runs one action on a scratch copy and reports what it would change.
async fn preview(store: &Shared, table: &str, action: Action) -> ApiResult {
    let mut doc = store.read().await.doc.clone();
    let applied = doc.execute(table, action, "preview")?;
    let mut v = json!({"dry_run": true, "changes": applied.entry.changes});
    if let Some(w) = applied.warning {
        v["warning"] = json!(w);
    }
    Ok(Json(v))
}

fn persist(store: &Store) -> Result<(), Error> {
    if let Some(path) = &store.path {
        store.doc.save(path)?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct OverrideBody {
    index: Vec<usize>,
    value: f64,
    #[serde(default)]
    note: String,
    head: Option<u64>,
    author: Option<String>,
}

async fn override_cell(
    State(store): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<OverrideBody>, JsonRejection>,
) -> ApiResult {
    let Json(b) = body?;
    let action = Action::OverrideCell {
        index: b.index,
        value: b.value,
        note: b.note,
    };
    commit(&store, &id, b.head, action, b.author).await
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RegionInput {
    Spec(String),
    Predicates(Region),
}

#[derive(Deserialize)]
struct RegionBody {
    region: RegionInput,
    value: Option<f64>,
    #[serde(default)]
    note: String,
    #[serde(default)]
    meaningless: bool,
    head: Option<u64>,
    author: Option<String>,
}

async fn region(
    State(store): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<RegionBody>, JsonRejection>,
) -> ApiResult {
    let Json(b) = body?;
    let region = {
        let s = store.read().await;
        let axes = s.doc.table(&id)?.axes().to_vec();
        match b.region {
            RegionInput::Spec(spec) => Region::parse_spec(&axes, &spec)?,
            RegionInput::Predicates(r) => {
                r.validate(&axes)?;
                r
            }
        }
    };
    let action = match (b.meaningless, b.value) {
        (true, _) => Action::MarkMeaningless { region },
        (false, Some(value)) => Action::OverrideBlock {
            region,
            value,
            note: b.note,
        },
        (false, None) => {
            return Err(Error::Schema {
                path: "value".into(),
                reason: "a block override needs a value".into(),
            }
            .into())
        }
    };
    commit(&store, &id, b.head, action, b.author).await
}

#[derive(Deserialize)]
struct CornerBody {
    corner: String,
    value: f64,
    interpolator: Option<String>,
    #[serde(default)]
    dry_run: bool,
    head: Option<u64>,
    author: Option<String>,
}

fn bound_interpolator(binding: &Binding, given: Option<String>, table: &str) -> Result<String, Error> {
    given.or_else(|| binding.interpolator.clone()).ok_or_else(|| Error::NotFound {
        kind: "interpolator binding",
        id: table.to_string(),
    })
}

async fn edit_corner(
    State(store): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<CornerBody>, JsonRejection>,
) -> ApiResult {
    let Json(b) = body?;
    let corner = b.corner.parse()?;
    let interpolator = {
        let s = store.read().await;
        s.doc.table(&id)?;
        bound_interpolator(&s.doc.binding(&id), b.interpolator, &id)?
    };
    let action = Action::EditCorner {
        corner,
        value: b.value,
        interpolator,
    };
    if b.dry_run {
        return preview(&store, &id, action).await;
    }
    commit(&store, &id, b.head, action, b.author).await
}

#[derive(Deserialize, Default)]
struct DeriveBody {
    interpolator: Option<String>,
    categorical: Option<String>,
    #[serde(default)]
    dry_run: bool,
    head: Option<u64>,
    author: Option<String>,
}

async fn derive(
    State(store): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<DeriveBody>, JsonRejection>,
) -> ApiResult {
    let Json(b) = body?;
    let interpolator = {
        let s = store.read().await;
        s.doc.table(&id)?;
        bound_interpolator(&s.doc.binding(&id), b.interpolator, &id)?
    };
    let action = Action::Derive {
        interpolator,
        categorical: b.categorical,
    };
    if b.dry_run {
        let Json(mut v) = preview(&store, &id, action).await?;
        v["filled"] = json!(v["changes"].as_array().map_or(0, Vec::len));
        return Ok(Json(v));
    }
    let Json(mut v) = commit(&store, &id, b.head, action, b.author).await?;
    v["filled"] = json!(v["entry"]["changes"].as_array().map_or(0, Vec::len));
    Ok(Json(v))
}

#[derive(Deserialize)]
struct SwapBody {
    interpolator: String,
    #[serde(default)]
    dry_run: bool,
    head: Option<u64>,
    author: Option<String>,
}

async fn swap(
    State(store): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<SwapBody>, JsonRejection>,
) -> ApiResult {
    let Json(b) = body?;
    let action = Action::SwapInterpolator { to: b.interpolator };
    if b.dry_run {
        return preview(&store, &id, action).await;
    }
    commit(&store, &id, b.head, action, b.author).await
}

#[derive(Deserialize)]
struct DiffQuery {
    against: u64,
}

async fn diff(State(store): State<Shared>, Path(id): Path<String>, Query(q): Query<DiffQuery>) -> ApiResult {
    let store = store.read().await;
    let current = store.doc.table(&id)?;
    let then = store.doc.at(q.against)?;
    let changes = revision::diff(then.table(&id)?, current)?;
    Ok(Json(json!({
        "against": q.against,
        "head": store.doc.head(),
        "count": changes.len(),
        "changes": changes,
    })))
}

#[derive(Deserialize)]
struct ParseBody {
    text: String,
    table: Option<String>,
}

async fn parse(State(store): State<Shared>, body: Result<Json<ParseBody>, JsonRejection>) -> ApiResult {
    let Json(b) = body?;
    let set = parse_rules(&b.text)?;
    let mut v = json!({
        "rules": set.rules.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "formatted": format_rules(&set),
    });
    if let Some(id) = b.table {
        let store = store.read().await;
        let t = store.doc.table(&id)?;
        let compiled = compile(&set, t.axes(), t.conclusion_scale())?;
        let conflicts = mcf_core::rules::detect_conflicts(&compiled, t.axes());
        let cells: Vec<usize> = compiled
            .assignments
            .iter()
            .map(|a| t.region_cells(&a.region).len())
            .collect();
        v["assignments"] = json!(compiled.assignments);
        v["cells"] = json!(cells);
        v["conflicts"] = json!(conflicts);
    }
    Ok(Json(v))
}

#[derive(Deserialize)]
struct EvaluateBody {
    evidence: BTreeMap<String, f64>,
    #[serde(default)]
    policy: BlankPolicy,
}

async fn evaluate(State(store): State<Shared>, body: Result<Json<EvaluateBody>, JsonRejection>) -> ApiResult {
    let Json(b) = body?;
    let store = store.read().await;
    let base = parse_evidence_map(&store.doc, &b.evidence)?;
    let ev = store.doc.evaluate(&base, b.policy)?;
    let beliefs: BTreeMap<&String, f64> = ev
        .env
        .iter()
        .filter(|(k, _)| !base.contains_key(*k))
        .map(|(k, v)| (k, v.value()))
        .collect();
    Ok(Json(json!({
        "beliefs": beliefs,
        "evidence": b.evidence,
        "traces": ev.traces,
    })))
}

async fn journal(State(store): State<Shared>) -> ApiResult {
    let store = store.read().await;
    Ok(Json(json!({"head": store.doc.head(), "entries": store.doc.journal})))
}

#[derive(Deserialize, Default)]
struct RevertBody {
    head: Option<u64>,
    author: Option<String>,
}

async fn revert(
    State(store): State<Shared>,
    Path(entry): Path<u64>,
    body: Option<Json<RevertBody>>,
) -> ApiResult {
    let b = body.map(|Json(b)| b).unwrap_or_default();
    let table = store.read().await.doc.entry(entry)?.table.clone();
    commit(&store, &table, b.head, Action::RevertOf { entry }, b.author).await
}
