//! HTTP facade over the synthesis engine.
//!
//! * `GET /api/health`
//! * `POST /api/interpret` with `{ "commands": [...] }`
//! * `POST /api/synthesize` with a synthesis request, answered by `{ "job_id" }`
//! * `GET /api/jobs/{id}` for the job's status and, once done, its result
//!
//! Synthesis runs on a bounded pool of blocking workers. Finished and
//! unfinished jobs are forgotten after a time-to-live.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use turtle_synth::engine::{self, InterpretRequest, RequestError, SynthesisRequest, SynthesisResponse};
use turtle_synth::search::{DEFAULT_BUDGET, DEFAULT_COST};
use turtle_synth::CommandModel;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub max_budget: usize,
    pub max_cost: usize,
    /// Concurrent synthesis jobs.
    pub workers: usize,
    pub job_ttl: Duration,
    /// Model used by the sampling algorithms.
    pub model: CommandModel,
    /// Origins allowed to call the API from a browser; `None` allows any.
    pub allowed_origins: Option<Vec<String>>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            max_budget: DEFAULT_BUDGET,
            max_cost: DEFAULT_COST,
            workers: 2,
            job_ttl: Duration::from_secs(600),
            model: CommandModel::default(),
            allowed_origins: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobView {
    pub job_id: String,
    pub status: JobStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<SynthesisResponse>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

struct Job {
    view: JobView,
    created: Instant,
}

struct AppState {
    config: ServiceConfig,
    jobs: Mutex<HashMap<String, Job>>,
    next_job: AtomicU64,
    permits: Arc<Semaphore>,
}

impl AppState {
    fn purge_expired(&self) {
        let ttl = self.config.job_ttl;
        self.jobs.lock().unwrap().retain(|_, j| j.created.elapsed() < ttl);
    }

    fn update(&self, id: &str, f: impl FnOnce(&mut JobView)) {
        if let Some(job) = self.jobs.lock().unwrap().get_mut(id) {
            f(&mut job.view);
        }
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    index: Option<usize>,
}

fn error_response(status: StatusCode, error: String, index: Option<usize>) -> Response {
    (status, Json(ErrorBody { error, index })).into_response()
}

fn request_error(e: RequestError) -> Response {
    error_response(StatusCode::BAD_REQUEST, e.to_string(), e.index())
}

#[allow(clippy::result_large_err)]
fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, Response> {
    serde_json::from_slice(body)
        .map_err(|e| error_response(StatusCode::BAD_REQUEST, format!("invalid request body: {e}"), None))
}

/// Build the application router.
pub fn router(config: ServiceConfig) -> Router {
    let cors = match &config.allowed_origins {
        None => CorsLayer::new().allow_origin(Any),
        Some(origins) => CorsLayer::new().allow_origin(AllowOrigin::list(
            origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()),
        )),
    }
    .allow_methods([Method::GET, Method::POST])
    .allow_headers([header::CONTENT_TYPE]);
    let state = Arc::new(AppState {
        permits: Arc::new(Semaphore::new(config.workers.max(1))),
        config,
        jobs: Mutex::new(HashMap::new()),
        next_job: AtomicU64::new(1),
    });
    Router::new()
        .route("/api/health", get(health))
        .route("/api/interpret", post(interpret))
        .route("/api/synthesize", post(synthesize))
        .route("/api/jobs/{id}", get(job))
        .layer(cors)
        .with_state(state)
}

/// Serve until the process is stopped.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(config)).await
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "version": env!("CARGO_PKG_VERSION") }))
}

async fn interpret(body: Bytes) -> Response {
    let req: InterpretRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    match engine::handle_interpret(&req) {
        Ok(out) => Json(out).into_response(),
        Err(e) => request_error(e),
    }
}

async fn synthesize(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: SynthesisRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    let cfg = &state.config;
    if req.budget > cfg.max_budget || req.cost > cfg.max_cost {
        return error_response(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!(
                "budget {} / cost {} outside limits (max budget {}, max cost {})",
                req.budget, req.cost, cfg.max_budget, cfg.max_cost
            ),
            None,
        );
    }
    let prepared = match engine::prepare(&req) {
        Ok(p) => p,
        Err(e) => return request_error(e),
    };

    state.purge_expired();
    let job_id = state.next_job.fetch_add(1, Ordering::Relaxed).to_string();
    state.jobs.lock().unwrap().insert(
        job_id.clone(),
        Job {
            view: JobView {
                job_id: job_id.clone(),
                status: JobStatus::Queued,
                result: None,
                error: None,
            },
            created: Instant::now(),
        },
    );

    let worker_state = state.clone();
    let id = job_id.clone();
    tokio::spawn(async move {
        let Ok(_permit) = worker_state.permits.clone().acquire_owned().await else {
            return;
        };
        worker_state.update(&id, |v| v.status = JobStatus::Running);
        let model = worker_state.config.model.clone();
        let outcome = tokio::task::spawn_blocking(move || engine::run_prepared(&prepared, &model, 1)).await;
        worker_state.update(&id, |v| match outcome {
            Ok(resp) => {
                v.status = JobStatus::Done;
                v.result = Some(resp);
            }
            Err(e) => {
                v.status = JobStatus::Failed;
                v.error = Some(format!("synthesis failed: {e}"));
            }
        });
    });

    (StatusCode::ACCEPTED, Json(serde_json::json!({ "job_id": job_id }))).into_response()
}

async fn job(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    state.purge_expired();
    match state.jobs.lock().unwrap().get(&id) {
        Some(job) => Json(job.view.clone()).into_response(),
        None => error_response(
            StatusCode::NOT_FOUND,
            format!("no job {id:?} (unknown or expired)"),
            None,
        ),
    }
}
