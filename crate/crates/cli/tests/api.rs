use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use chrono::{DateTime, Duration, TimeZone, Utc};
use facihub_cli::api::{router, AppState};
use facihub_core::synth::{synthetic_log, to_ndjson, SynthParams};
use facihub_core::{Engine, EngineConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixed_clock() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 11, 20, 12, 0, 0).unwrap()
}

fn params() -> SynthParams {
    SynthParams { n_records: 200, n_learners: 20, days: 5, ..SynthParams::default() }
}

fn config() -> EngineConfig {
    let mut cfg = EngineConfig::default();
    cfg.stats.permutation_n = 200;
    cfg
}

fn state_with(engine: Engine) -> Arc<AppState> {
    Arc::new(AppState::new(engine).with_clock(fixed_clock))
}

fn empty_state() -> Arc<AppState> {
    state_with(Engine::in_memory(config()).unwrap())
}

struct Reply {
    status: StatusCode,
    content_type: Option<String>,
    text: String,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_str(&self.text).unwrap_or_else(|e| panic!("not JSON ({e}): {}", self.text))
    }
}

async fn send(app: &Router, method: Method, uri: &str, body: Option<String>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header(header::CONTENT_TYPE, "application/json");
    }
    let req = req.body(body.map_or_else(Body::empty, Body::from)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let content_type = resp.headers().get(header::CONTENT_TYPE).map(|v| v.to_str().unwrap().to_string());
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    Reply { status, content_type, text: String::from_utf8(bytes.to_vec()).unwrap() }
}

async fn get(app: &Router, uri: &str) -> Reply {
    send(app, Method::GET, uri, None).await
}

async fn post(app: &Router, uri: &str, body: Value) -> Reply {
    send(app, Method::POST, uri, Some(body.to_string())).await
}

fn accept_body() -> Value {
    json!({
        "decision": "accept",
        "dimension_flags": {
            "role_task_alignment": "pass",
            "interactional_appropriateness": "pass",
            "factual_plausibility": "pass"
        },
        "reviewer_id": "r1"
    })
}

/// Ingests the synthetic log and runs targeting once through the API.
async fn seeded_app() -> (Router, Vec<String>) {
    let app = router(empty_state());
    let resp = send(&app, Method::POST, "/api/ingest", Some(to_ndjson(&synthetic_log(&params())))).await;
    assert_eq!(resp.status, StatusCode::OK, "{}", resp.text);
    let as_of = params().start + Duration::days(3);
    let run = post(&app, "/api/runs", json!({"as_of": as_of.to_rfc3339()})).await;
    assert_eq!(run.status, StatusCode::OK, "{}", run.text);
    let ids: Vec<String> = serde_json::from_value(run.json()["enqueued"].clone()).unwrap();
    assert!(!ids.is_empty());
    (app, ids)
}

#[tokio::test]
async fn healthz_reports_version() {
    let resp = get(&router(empty_state()), "/healthz").await;
    assert_eq!(resp.status, StatusCode::OK);
    assert_eq!(resp.json(), json!({"status": "ok", "version": facihub_core::VERSION}));
}

#[tokio::test]
async fn unknown_route_is_json_404() {
    let resp = get(&router(empty_state()), "/api/nope").await;
    assert_eq!(resp.status, StatusCode::NOT_FOUND);
    assert_eq!(resp.json()["code"], "not_found");
    assert!(resp.content_type.unwrap().starts_with("application/json"));
}

#[tokio::test]
async fn wrong_method_is_json_405() {
    let resp = send(&router(empty_state()), Method::DELETE, "/api/queue", None).await;
    assert_eq!(resp.status, StatusCode::METHOD_NOT_ALLOWED);
    assert_eq!(resp.json()["code"], "method_not_allowed");
}

#[tokio::test]
async fn ingest_reports_counts_and_drops_duplicates() {
    let app = router(empty_state());
    let log = to_ndjson(&synthetic_log(&params()));
    let first = send(&app, Method::POST, "/api/ingest", Some(log.clone())).await.json();
    assert_eq!(first["accepted"], 200);
    let again = send(&app, Method::POST, "/api/ingest", Some(log)).await.json();
    assert_eq!(again["accepted"], 0);
    assert_eq!(again["duplicates_dropped"], 200);
}

#[tokio::test]
async fn run_requires_as_of() {
    let app = router(empty_state());
    let resp = post(&app, "/api/runs", json!({})).await;
    assert_eq!(resp.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(resp.json()["fields"][0]["field"], "as_of");
    let resp = post(&app, "/api/runs", json!({"as_of": "yesterday"})).await;
    assert_eq!(resp.status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn queue_lists_enqueued_candidates_in_order() {
    let (app, ids) = seeded_app().await;
    let queue = get(&app, "/api/queue").await.json();
    let listed: Vec<&str> =
        queue.as_array().unwrap().iter().map(|e| e["candidate"]["candidate_id"].as_str().unwrap()).collect();
    assert_eq!(listed, ids.iter().map(String::as_str).collect::<Vec<_>>());
}

#[tokio::test]
async fn candidate_includes_thread_context() {
    let (app, ids) = seeded_app().await;
    let view = get(&app, &format!("/api/candidates/{}", ids[0])).await;
    assert_eq!(view.status, StatusCode::OK);
    let view = view.json();
    assert_eq!(view["candidate"]["candidate_id"], ids[0].as_str());
    assert!(view["context"].is_object());
    assert!(view["review"].is_null());
    assert_eq!(get(&app, "/api/candidates/missing").await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn decision_lifecycle() {
    let (app, ids) = seeded_app().await;
    let uri = format!("/api/candidates/{}/decision", ids[0]);

    let bad =
        post(&app, &uri, json!({"decision": "accept", "dimension_flags": {"factual_plausibility": "fail"}})).await;
    assert_eq!(bad.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(bad.json()["fields"].as_array().unwrap().len() >= 2, "{}", bad.text);

    let malformed = send(&app, Method::POST, &uri, Some("{not json".into())).await;
    assert_eq!(malformed.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(malformed.json()["fields"][0]["field"], "$");

    let ok = post(&app, &uri, accept_body()).await;
    assert_eq!(ok.status, StatusCode::OK, "{}", ok.text);
    assert_eq!(ok.json()["decided_at"], "2025-11-20T12:00:00Z");

    let mut reject = accept_body();
    reject["decision"] = json!("reject");
    reject["dimension_flags"]["factual_plausibility"] = json!("fail");
    let conflict = post(&app, &uri, reject).await;
    assert_eq!(conflict.status, StatusCode::CONFLICT);
    assert_eq!(conflict.json()["existing"], ok.json());

    let missing = post(&app, "/api/candidates/missing/decision", accept_body()).await;
    assert_eq!(missing.status, StatusCode::NOT_FOUND);

    // A decided candidate leaves the pending queue.
    let queue = get(&app, "/api/queue").await.json();
    assert!(queue.as_array().unwrap().iter().all(|e| e["candidate"]["candidate_id"] != ids[0].as_str()));
}

#[tokio::test]
async fn publish_only_accepted_once() {
    let (app, ids) = seeded_app().await;
    post(&app, &format!("/api/candidates/{}/decision", ids[0]), accept_body()).await;
    let published = post(&app, "/api/publish", json!({})).await;
    assert_eq!(published.status, StatusCode::OK, "{}", published.text);
    let events = published.json();
    assert_eq!(events.as_array().unwrap().len(), 1);
    assert_eq!(events[0]["candidate_id"], ids[0].as_str());
    let again = send(&app, Method::POST, "/api/publish", None).await.json();
    assert_eq!(again, json!([]));
    let view = get(&app, &format!("/api/candidates/{}", ids[0])).await.json();
    assert_eq!(view["publication"], events[0]);
}

#[tokio::test]
async fn metrics_cover_requested_days() {
    let (app, ids) = seeded_app().await;
    post(&app, &format!("/api/candidates/{}/decision", ids[0]), accept_body()).await;
    let m = get(&app, "/api/metrics/acceptance").await;
    assert_eq!(m.status, StatusCode::OK, "{}", m.text);
    let m = m.json();
    assert_eq!(m["total"]["generated"], ids.len());
    assert_eq!(m["total"]["accepted"], 1);

    let explicit = get(&app, "/api/metrics/acceptance?from=2025-11-01&to=2025-11-03").await.json();
    assert_eq!(explicit["rows"].as_array().unwrap().len(), 3);

    let reversed = get(&app, "/api/metrics/acceptance?from=2025-11-05&to=2025-11-01").await;
    assert_eq!(reversed.status, StatusCode::UNPROCESSABLE_ENTITY);
    let garbled = get(&app, "/api/metrics/acceptance?from=11/01/2025").await;
    assert_eq!(garbled.status, StatusCode::UNPROCESSABLE_ENTITY);
}

/// Engine with daily runs, every candidate accepted and published, and all
/// learner records coded by the stub coder.
fn analysed_engine() -> Engine {
    let p = SynthParams { n_records: 500, n_learners: 40, days: 14, ..SynthParams::default() };
    let mut engine = Engine::in_memory(config()).unwrap();
    engine.ingest_str(&to_ndjson(&synthetic_log(&p))).unwrap();
    let accept: facihub_core::review::DecisionPayload = serde_json::from_value(accept_body()).unwrap();
    for day in 1..=p.days {
        let as_of = p.start + Duration::days(day);
        for id in engine.run(as_of).unwrap().enqueued {
            engine.decide(&id, accept.clone(), as_of + Duration::hours(1)).unwrap();
        }
        engine.publish(None, as_of + Duration::hours(2)).unwrap();
    }
    engine.code_pending().unwrap();
    engine
}

#[tokio::test]
async fn analyses_render_as_json_and_tsv() {
    let app = router(state_with(analysed_engine()));
    for kind in ["goal1", "goal2"] {
        let json = get(&app, &format!("/api/analysis/{kind}")).await;
        assert_eq!(json.status, StatusCode::OK, "{kind}: {}", json.text);
        assert_eq!(json.json()["rows"].as_array().unwrap().len(), 9, "{kind}");
        let tsv = get(&app, &format!("/api/analysis/{kind}?format=tsv")).await;
        assert!(tsv.content_type.unwrap().starts_with("text/tab-separated-values"));
        assert_eq!(tsv.text.lines().count(), 10, "{kind}: header plus nine rows");
    }
    let perm = get(&app, "/api/analysis/permutation").await;
    assert_eq!(perm.status, StatusCode::OK, "{}", perm.text);
    assert_eq!(perm.json().as_array().unwrap().len(), 9);
    let balance = get(&app, "/api/analysis/balance").await;
    assert_eq!(balance.status, StatusCode::OK, "{}", balance.text);
    assert!(balance.json().is_object());

    assert_eq!(get(&app, "/api/analysis/goal3").await.status, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/api/analysis/goal1?format=xml").await.status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn analysis_is_deterministic() {
    let app = router(state_with(analysed_engine()));
    let a = get(&app, "/api/analysis/permutation?format=tsv").await.text;
    let b = get(&app, "/api/analysis/permutation?format=tsv").await.text;
    assert_eq!(a, b);
}

#[tokio::test]
async fn token_guards_api_but_not_health() {
    let mut cfg = config();
    cfg.server.api_token = Some("s3cret".into());
    let app = router(state_with(Engine::in_memory(cfg).unwrap()));
    assert_eq!(get(&app, "/healthz").await.status, StatusCode::OK);
    let denied = get(&app, "/api/queue").await;
    assert_eq!(denied.status, StatusCode::UNAUTHORIZED);
    assert_eq!(denied.json()["code"], "unauthorized");
    let req = Request::get("/api/queue").header(header::AUTHORIZATION, "Bearer s3cret").body(Body::empty()).unwrap();
    assert_eq!(app.clone().oneshot(req).await.unwrap().status(), StatusCode::OK);
}

#[tokio::test]
async fn second_long_job_is_refused_while_one_runs() {
    let state = empty_state();
    let app = router(state.clone());
    assert_eq!(get(&app, "/api/jobs").await.json(), json!({"running": null}));
    let _held = state.jobs().try_start("run", fixed_clock()).unwrap();
    let polled = get(&app, "/api/jobs").await.json();
    assert_eq!(polled["running"]["kind"], "run");
    let busy = post(&app, "/api/runs", json!({"as_of": "2025-11-05T00:00:00Z"})).await;
    assert_eq!(busy.status, StatusCode::CONFLICT);
    assert_eq!(busy.json()["code"], "busy");
    assert_eq!(busy.json()["job"]["kind"], "run");
    let busy = get(&app, "/api/analysis/goal1").await;
    assert_eq!(busy.status, StatusCode::CONFLICT);
}
