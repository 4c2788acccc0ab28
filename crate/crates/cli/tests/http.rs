use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tokio::sync::RwLock;
use tower::ServiceExt;

use mcf_cli::server::{router, Store};
use mcf_core::{fixtures, Document};

fn app(doc: Document) -> Router {
    router(Arc::new(RwLock::new(Store { doc, path: None })))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
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
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

async fn derived() -> Router {
    let app = app(Document::angina_example());
    let (s, v) = call(&app, "POST", "/api/tables/angina/derive", Some(json!({"interpolator": "bayes"}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    app
}

#[tokio::test]
async fn lists_tables() {
    let app = app(Document::full_example());
    let (s, v) = call(&app, "GET", "/api/tables", None).await;
    assert_eq!(s, StatusCode::OK);
    let ids: Vec<&str> = v["tables"].as_array().unwrap().iter().map(|t| t["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["angina", "quadrants", "water-damage"]);
    assert_eq!(v["tables"][0]["shape"], json!([9, 9]));

    let (s, v) = call(&app, "GET", "/api/tables/angina", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["binding"]["interpolator"], "bayes");

    let (s, v) = call(&app, "GET", "/api/tables/nope", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "not_found");
    assert_eq!(v["path"], "nope");
}

#[tokio::test]
async fn derive_fills_81_cells() {
    let app = app(Document::angina_example());
    let (s, v) = call(&app, "POST", "/api/tables/angina/derive", Some(json!({"interpolator": "bayes", "dry_run": true}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["filled"], 81);
    let (_, j) = call(&app, "GET", "/api/journal", None).await;
    assert_eq!(j["head"], 0);

    let (s, v) = call(&app, "POST", "/api/tables/angina/derive", Some(json!({"interpolator": "bayes"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["filled"], 81);
    assert_eq!(v["entry"]["id"], 1);

    let (_, cells) = call(&app, "GET", "/api/tables/angina/cells", None).await;
    let cells = cells["cells"].as_array().unwrap().clone();
    assert_eq!(cells.len(), 81);
    assert!(cells.iter().all(|c| c["code"] == "D"));
    let c = cells.iter().find(|c| c["index"] == json!([1, 0])).unwrap();
    assert_eq!(c["display"], ".91");
}

#[tokio::test]
async fn evaluate_angina() {
    let app = app(Document::angina_example());
    let (s, v) = call(&app, "POST", "/api/evaluate", Some(json!({"evidence": {"episode": 0.5, "risk": 0.75}}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let b = v["beliefs"]["angina_history"].as_f64().unwrap();
    assert!((b - 0.5875).abs() <= 1e-12);
    assert_eq!(v["traces"]["angina_history"]["step"], "rule");
    assert_eq!(v["traces"]["angina_history"]["inputs"].as_array().unwrap().len(), 2);

    let (s, v) = call(&app, "POST", "/api/evaluate", Some(json!({"evidence": {"episode": 1.5}}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "out_of_range");
}

#[tokio::test]
async fn block_overrides_through_the_api() {
    let app = derived().await;
    let (s, v) = call(
        &app,
        "POST",
        "/api/tables/angina/region",
        Some(json!({"region": ".625,.5;>=.625", "value": 0.75, "head": 1})),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["head"], 2);
    assert_eq!(v["entry"]["changes"].as_array().unwrap().len(), 8);

    // Predicates may also be given structurally.
    let region = json!([{"in": [0.375, 0.25]}, {"ge": 0.625}]);
    let (s, v) = call(&app, "POST", "/api/tables/angina/region", Some(json!({"region": region, "value": 0.5, "head": 2}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");

    let (s, v) = call(&app, "GET", "/api/tables/angina/diff?against=1", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["count"], 16);

    let (_, cells) = call(&app, "GET", "/api/tables/angina/cells", None).await;
    for c in cells["cells"].as_array().unwrap() {
        let idx: Vec<usize> = serde_json::from_value(c["index"].clone()).unwrap();
        let want = fixtures::OVERRIDDEN_PRINTED[idx[1]][idx[0]];
        assert_eq!(mcf_core::round_half_up(c["value"].as_f64().unwrap()), want);
    }
}

#[tokio::test]
async fn stale_head_conflicts() {
    let app = derived().await;
    let body = json!({"index": [4, 2], "value": 0.75, "head": 0});
    let (s, v) = call(&app, "POST", "/api/tables/angina/cells", Some(body)).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["code"], "stale_head");
    let (s, v) = call(&app, "POST", "/api/tables/angina/cells", Some(json!({"index": [4, 2], "value": 0.75, "head": 1}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["entry"]["action"]["kind"], "override_cell");
}

#[tokio::test]
async fn corner_preview_then_commit() {
    let app = derived().await;
    let body = json!({"corner": "FT", "value": 0.35, "dry_run": true});
    let (s, v) = call(&app, "POST", "/api/tables/angina/corners", Some(body)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let changed = v["changes"]
        .as_array()
        .unwrap()
        .iter()
        .find(|d| d["index"] == json!([4, 2]))
        .unwrap()
        .clone();
    assert_eq!(mcf_core::display_value(changed["before"]["value"].as_f64().unwrap()), ".59");
    assert_eq!(mcf_core::display_value(changed["after"]["value"].as_f64().unwrap()), ".63");
    let (_, j) = call(&app, "GET", "/api/journal", None).await;
    assert_eq!(j["head"], 1);

    let (s, v) = call(&app, "POST", "/api/tables/angina/corners", Some(json!({"corner": "FT", "value": 0.35}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let (_, e) = call(&app, "POST", "/api/evaluate", Some(json!({"evidence": {"episode": 0.5, "risk": 0.75}}))).await;
    assert!((e["beliefs"]["angina_history"].as_f64().unwrap() - 0.625).abs() < 1e-12);

    let (s, v) = call(&app, "POST", "/api/tables/angina/corners", Some(json!({"corner": "FTX", "value": 0.35}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "corner_undefined");
}

#[tokio::test]
async fn swap_warns() {
    let mut doc = Document::angina_example();
    let joint = mcf_core::JointDistribution::new(2, vec![0.45, 0.05, 0.30, 0.20]).unwrap();
    doc.library.interpolators.insert(
        "dependent".into(),
        mcf_core::Interpolator::joint("dependent", mcf_core::JointSpec::Fixed(joint)),
    );
    let app = app(doc);
    call(&app, "POST", "/api/tables/angina/derive", Some(json!({"interpolator": "bayes"}))).await;
    let (s, v) = call(&app, "POST", "/api/tables/angina/interpolator", Some(json!({"interpolator": "dependent"}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert!(v["warning"]["changed"].as_u64().unwrap() > 0);
    let (_, t) = call(&app, "GET", "/api/tables/angina", None).await;
    assert_eq!(t["binding"]["interpolator"], "dependent");
}

#[tokio::test]
async fn journal_and_revert() {
    let app = derived().await;
    call(&app, "POST", "/api/tables/angina/cells", Some(json!({"index": [4, 2], "value": 0.75}))).await;
    let (s, v) = call(&app, "POST", "/api/journal/2/revert", None).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["entry"]["action"], json!({"kind": "revert_of", "entry": 2}));
    let (s, v) = call(&app, "POST", "/api/journal/1/revert", Some(json!({}))).await;
    assert_eq!(s, StatusCode::CONFLICT, "{v}");
    assert_eq!(v["code"], "not_revertible");

    let (_, j) = call(&app, "GET", "/api/journal", None).await;
    let entries = j["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 3);
    let ids: Vec<u64> = entries.iter().map(|e| e["id"].as_u64().unwrap()).collect();
    assert_eq!(ids, [1, 2, 3]);
}

#[tokio::test]
async fn journal_replays_to_current_state() {
    let app = derived().await;
    call(&app, "POST", "/api/tables/angina/region", Some(json!({"region": ".625,.5;>=.625", "value": 0.75}))).await;
    call(&app, "POST", "/api/tables/angina/corners", Some(json!({"corner": "FT", "value": 0.35}))).await;
    let (_, j) = call(&app, "GET", "/api/journal", None).await;
    let (_, cells) = call(&app, "GET", "/api/tables/angina/cells", None).await;

    let mut doc = Document::angina_example();
    doc.journal = serde_json::from_value(j["entries"].clone()).unwrap();
    // A fresh document plus the served journal must rebuild the same cells.
    let rebuilt = {
        let mut d = Document::angina_example();
        for e in &doc.journal {
            d.execute(&e.table, e.action.clone(), &e.author).unwrap();
        }
        d
    };
    let served: Vec<f64> = cells["cells"].as_array().unwrap().iter().map(|c| c["value"].as_f64().unwrap()).collect();
    let local: Vec<f64> = rebuilt.table("angina").unwrap().cells().iter().map(|c| c.value().unwrap()).collect();
    assert_eq!(served, local);
}

#[tokio::test]
async fn rules_parse_endpoint() {
    let app = app(Document::full_example());
    let (s, v) = call(&app, "POST", "/api/rules/parse", Some(json!({"text": fixtures::QUADRANT_RULES, "table": "quadrants"}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["rules"].as_array().unwrap().len(), 3);
    assert_eq!(v["cells"][0], 25);
    assert_eq!(v["conflicts"], json!([]));

    let (s, v) = call(&app, "POST", "/api/rules/parse", Some(json!({"text": "IF bel(E1) >= THEN"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "parse_error");
    assert!(v["path"].as_str().unwrap().starts_with("1:"));
}

#[tokio::test]
async fn malformed_bodies_are_validation_errors() {
    let app = derived().await;
    let (s, v) = call(&app, "POST", "/api/tables/angina/cells", Some(json!({"value": 0.5}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "schema_error");
    let (s, v) = call(&app, "POST", "/api/tables/angina/region", Some(json!({"region": "*;*"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["path"], "value");
}

#[tokio::test]
async fn mutations_persist_to_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kb.mcf.json");
    Document::angina_example().save(&path).unwrap();
    let store = Store {
        doc: Document::load(&path).unwrap(),
        path: Some(path.clone()),
    };
    let app = router(Arc::new(RwLock::new(store)));
    call(&app, "POST", "/api/tables/angina/derive", Some(json!({"interpolator": "bayes"}))).await;
    let saved = Document::load(&path).unwrap();
    assert_eq!(saved.head(), 1);
    assert_eq!(saved.table("angina").unwrap(), &fixtures::angina_table());
}
