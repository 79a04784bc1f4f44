//! HTTP API consumed by the review UI and by scripts.

use std::net::SocketAddr;
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, NaiveDate, SubsecRound, Utc};
use facihub_core::engine::{JobSlot, RunOutcome};
use facihub_core::review::{FieldError, QueueEntry};
use facihub_core::stats::PermutationResult;
use facihub_core::{timefmt, Engine, EngineConfig};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::AppError;

pub struct AppState {
    engine: RwLock<Engine>,
    jobs: JobSlot,
    token: Option<String>,
    clock: fn() -> DateTime<Utc>,
}

pub type SharedState = Arc<AppState>;

fn system_clock() -> DateTime<Utc> {
    Utc::now().trunc_subsecs(0)
}

impl AppState {
    pub fn new(engine: Engine) -> Self {
        let token = engine.config().server.api_token.clone();
        Self { engine: RwLock::new(engine), jobs: JobSlot::new(), token, clock: system_clock }
    }

    /// Fixes server-minted timestamps, for reproducible tests.
    pub fn with_clock(mut self, clock: fn() -> DateTime<Utc>) -> Self {
        self.clock = clock;
        self
    }

    /// The slot that serializes runs and analyses.
    pub fn jobs(&self) -> &JobSlot {
        &self.jobs
    }

    fn read(&self) -> Result<RwLockReadGuard<'_, Engine>, AppError> {
        self.engine.read().map_err(|_| AppError::internal("engine lock poisoned"))
    }

    fn write(&self) -> Result<RwLockWriteGuard<'_, Engine>, AppError> {
        self.engine.write().map_err(|_| AppError::internal("engine lock poisoned"))
    }
}

pub fn router(state: SharedState) -> Router {
    let api = Router::new()
        .route("/ingest", post(ingest).layer(DefaultBodyLimit::max(256 * 1024 * 1024)))
        .route("/runs", post(create_run))
        .route("/queue", get(queue))
        .route("/candidates/{id}", get(candidate))
        .route("/candidates/{id}/decision", post(decide))
        .route("/publish", post(publish))
        .route("/metrics/acceptance", get(metrics))
        .route("/analysis/{kind}", get(analysis))
        .route("/jobs", get(current_job))
        .layer(middleware::from_fn_with_state(state.clone(), require_token));
    Router::new()
        .route("/healthz", get(healthz))
        .nest("/api", api)
        .fallback(|| async { AppError::not_found("no such route") })
        .method_not_allowed_fallback(|| async {
            AppError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed on this route")
        })
        .with_state(state)
}

async fn require_token(State(state): State<SharedState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let presented = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_str()) {
            return AppError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or invalid bearer token")
                .into_response();
        }
    }
    next.run(req).await
}

/// Runs blocking engine work off the async executor.
async fn blocking<T, F>(state: &SharedState, f: F) -> Result<T, AppError>
where
    T: Send + 'static,
    F: FnOnce(&AppState) -> Result<T, AppError> + Send + 'static,
{
    let state = state.clone();
    tokio::task::spawn_blocking(move || f(&state)).await.map_err(|e| AppError::internal(e.to_string()))?
}

async fn healthz() -> Json<Value> {
    Json(json!({"status": "ok", "version": facihub_core::VERSION}))
}

/// The long-running job currently holding the slot, if any. Clients poll
/// this while a run or analysis request is outstanding.
async fn current_job(State(state): State<SharedState>) -> Json<Value> {
    Json(json!({ "running": state.jobs.current() }))
}

async fn ingest(State(state): State<SharedState>, body: String) -> Result<Response, AppError> {
    let report = blocking(&state, move |s| Ok(s.write()?.ingest_str(&body)?)).await?;
    Ok(Json(report).into_response())
}

fn parse_body(body: &Bytes) -> Result<Value, AppError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(json!({}));
    }
    serde_json::from_slice(body)
        .map_err(|e| AppError::validation(vec![FieldError::new("$", format!("malformed JSON: {e}"))]))
}

fn time_field(body: &Value, field: &str, required: bool) -> Result<Option<DateTime<Utc>>, AppError> {
    match body.get(field) {
        None | Some(Value::Null) if !required => Ok(None),
        None | Some(Value::Null) => Err(AppError::validation(vec![FieldError::new(field, "required")])),
        Some(Value::String(s)) => timefmt::parse_utc(s)
            .map(Some)
            .ok_or_else(|| AppError::validation(vec![FieldError::new(field, "expected an ISO-8601 timestamp")])),
        Some(_) => Err(AppError::validation(vec![FieldError::new(field, "expected an ISO-8601 timestamp")])),
    }
}

/// Targeting and generation for one `as_of`. The engine lock is released
/// while the model is called.
pub fn run_job(state: &AppState, as_of: DateTime<Utc>) -> Result<RunOutcome, AppError> {
    let _ticket = state.jobs.try_start("run", (state.clock)()).map_err(AppError::busy)?;
    let (plan, generator) = {
        let mut engine = state.write()?;
        (engine.plan_run(as_of)?, engine.generator())
    };
    let results = generator.generate(&plan.jobs, as_of);
    Ok(state.write()?.commit_candidates(plan, results, as_of)?)
}

async fn create_run(State(state): State<SharedState>, body: Bytes) -> Result<Json<RunOutcome>, AppError> {
    let body = parse_body(&body)?;
    let as_of = time_field(&body, "as_of", true)?.expect("required field");
    Ok(Json(blocking(&state, move |s| run_job(s, as_of)).await?))
}

async fn queue(State(state): State<SharedState>) -> Result<Json<Vec<QueueEntry>>, AppError> {
    Ok(Json(state.read()?.queue().pending().cloned().collect()))
}

async fn candidate(State(state): State<SharedState>, Path(id): Path<String>) -> Result<Response, AppError> {
    let view = state.read()?.candidate(&id).ok_or_else(|| AppError::not_found(format!("unknown candidate: {id}")))?;
    Ok(Json(view).into_response())
}

async fn decide(State(state): State<SharedState>, Path(id): Path<String>, body: Bytes) -> Result<Response, AppError> {
    let mut engine = state.write()?;
    if engine.candidate(&id).is_none() {
        return Err(AppError::not_found(format!("unknown candidate: {id}")));
    }
    let body = parse_body(&body)?;
    let review = engine.decide_json(&id, &body, (state.clock)())?;
    Ok(Json(review).into_response())
}

async fn publish(State(state): State<SharedState>, body: Bytes) -> Result<Response, AppError> {
    let body = parse_body(&body)?;
    let since = time_field(&body, "since", false)?;
    let events = blocking(&state, move |s| Ok(s.write()?.publish(since, (s.clock)())?)).await?;
    Ok(Json(events).into_response())
}

#[derive(Deserialize)]
struct MetricsQuery {
    from: Option<String>,
    to: Option<String>,
}

fn date_param(raw: Option<&str>, field: &str) -> Result<Option<NaiveDate>, AppError> {
    raw.map(|s| {
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map_err(|_| AppError::validation(vec![FieldError::new(field, "expected YYYY-MM-DD")]))
    })
    .transpose()
}

async fn metrics(State(state): State<SharedState>, Query(q): Query<MetricsQuery>) -> Result<Response, AppError> {
    let from = date_param(q.from.as_deref(), "from")?;
    let to = date_param(q.to.as_deref(), "to")?;
    let engine = state.read()?;
    // Open bounds default to the span of generated candidates.
    let dates: Vec<NaiveDate> =
        engine.queue().entries().iter().map(|e| e.candidate.generated_at.date_naive()).collect();
    let today = (state.clock)().date_naive();
    let from = from.or_else(|| dates.iter().min().copied()).unwrap_or(today);
    let to = to.or_else(|| dates.iter().max().copied()).unwrap_or(today);
    if from > to {
        return Err(AppError::validation(vec![FieldError::new("from", "must not be after to")]));
    }
    Ok(Json(engine.metrics(from, to)).into_response())
}

#[derive(Deserialize)]
struct AnalysisQuery {
    format: Option<String>,
}

/// Runs one analysis and renders it both as JSON and as its table.
pub fn analysis_output(engine: &Engine, kind: &str) -> Result<(Value, String), AppError> {
    let data = engine.analysis_data()?;
    let mut out = Vec::new();
    let value = match kind {
        "goal1" => {
            let r = data.goal1()?;
            r.write_tsv(&mut out).map_err(|e| AppError::internal(e.to_string()))?;
            serde_json::to_value(r)
        }
        "goal2" => {
            let r = data.goal2()?;
            r.write_tsv(&mut out).map_err(|e| AppError::internal(e.to_string()))?;
            serde_json::to_value(r)
        }
        "permutation" => {
            let r = data.permutation()?;
            PermutationResult::write_tsv(&r, &mut out).map_err(|e| AppError::internal(e.to_string()))?;
            serde_json::to_value(r)
        }
        "balance" => {
            let r = data.balance()?;
            r.write_tsv(&mut out).map_err(|e| AppError::internal(e.to_string()))?;
            serde_json::to_value(r)
        }
        "means" => {
            data.write_means_tsv(&mut out).map_err(|e| AppError::internal(e.to_string()))?;
            serde_json::to_value(data.learner_means().into_values().collect::<Vec<_>>())
        }
        other => return Err(AppError::not_found(format!("unknown analysis: {other}"))),
    }
    .map_err(|e| AppError::internal(e.to_string()))?;
    Ok((value, String::from_utf8(out).map_err(|e| AppError::internal(e.to_string()))?))
}

async fn analysis(
    State(state): State<SharedState>,
    Path(kind): Path<String>,
    Query(q): Query<AnalysisQuery>,
) -> Result<Response, AppError> {
    let tsv = match q.format.as_deref() {
        None | Some("json") => false,
        Some("tsv") => true,
        Some(_) => return Err(AppError::validation(vec![FieldError::new("format", "expected json or tsv")])),
    };
    let (value, table) = blocking(&state, move |s| {
        let _ticket = s.jobs.try_start("analysis", (s.clock)()).map_err(AppError::busy)?;
        let engine = s.read()?;
        analysis_output(&engine, &kind)
    })
    .await?;
    if tsv {
        Ok(([(header::CONTENT_TYPE, "text/tab-separated-values; charset=utf-8")], table).into_response())
    } else {
        Ok(Json(value).into_response())
    }
}

/// Binds and serves until interrupted; in-flight requests finish first.
pub async fn serve(config: EngineConfig, bind: Option<String>) -> Result<(), AppError> {
    let addr: SocketAddr = bind
        .unwrap_or_else(|| config.server.bind.clone())
        .parse()
        .map_err(|e| AppError::bad_request(format!("invalid bind address: {e}")))?;
    let engine = tokio::task::spawn_blocking(move || Engine::open(config))
        .await
        .map_err(|e| AppError::internal(e.to_string()))??;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| AppError::new(StatusCode::INTERNAL_SERVER_ERROR, "bind", format!("cannot bind {addr}: {e}")))?;
    tracing::info!(%addr, "serving");
    axum::serve(listener, router(Arc::new(AppState::new(engine))))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        })
        .await
        .map_err(|e| AppError::internal(e.to_string()))
}
