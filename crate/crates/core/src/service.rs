//! HTTP job service.
//!
//! Cases and finished results live on disk under the data directory, keyed
//! by content hash, so a restarted service still answers for earlier jobs.
//! A job id is derived from its kind, case and normalized parameters:
//! submitting the same request twice returns the same job, and a request
//! whose result is already stored completes immediately.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;
use tokio::sync::Semaphore;
use tower_http::services::ServeDir;

use crate::analysis::{evaluate_plan, solve_plan, sweep_with_progress, AnalysisError, Problem};
use crate::case_io::{read_network_json, write_document, write_network_json};
use crate::formulation::{build_contingency_set, Contingency, ContingencyPolicy, ContingencySet, ShutoffPlan};
use crate::network::{Network, PlanningParams};
use crate::solver::{SolveStatus, SolverOptions};

const ID_HEX: usize = 16;

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub workers: usize,
    pub static_dir: Option<PathBuf>,
    /// Backend and tolerances for every job; requests may only tighten limits.
    pub solver: SolverOptions,
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("data directory {path}: {source}")]
    DataDir { path: PathBuf, source: std::io::Error },
    #[error("stored file {path} is corrupt: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server error: {0}")]
    Serve(std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    SolveOps,
    SolveScops,
    Evaluate,
    Sweep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
    Infeasible,
}

impl JobState {
    fn finished(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed | JobState::Infeasible)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JobTimings {
    pub submitted_at: f64,
    pub started_at: Option<f64>,
    pub finished_at: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub kind: JobKind,
    pub case_id: String,
    pub params: Value,
    pub state: JobState,
    pub progress: f64,
    pub result_ref: Option<String>,
    pub message: Option<String>,
    pub timings: JobTimings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ContingencySpec {
    /// `"non-bridge"`.
    Named(String),
    Explicit(Vec<Contingency>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pflex: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contingencies: Option<ContingencySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_contingencies: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<ShutoffPlan>,
    /// Seconds per MILP solve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_limit: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitRequest {
    pub kind: JobKind,
    pub case_id: String,
    #[serde(default)]
    pub params: JobParams,
}

#[derive(Clone, Debug, Serialize)]
pub struct CaseSummary {
    pub id: String,
    pub buses: usize,
    pub lines: usize,
    pub generators: usize,
    pub loads: usize,
    pub total_demand: f64,
    pub total_risk: f64,
}

impl CaseSummary {
    fn of(id: &str, n: &Network) -> Self {
        Self {
            id: id.to_string(),
            buses: n.buses.len(),
            lines: n.lines.len(),
            generators: n.generators.len(),
            loads: n.loads.len(),
            total_demand: n.total_demand(),
            total_risk: n.total_risk(),
        }
    }
}

struct JobEntry {
    record: JobRecord,
    cancelled: Arc<AtomicBool>,
}

struct Inner {
    config: ServiceConfig,
    cases: RwLock<BTreeMap<String, Arc<Network>>>,
    jobs: Mutex<BTreeMap<String, JobEntry>>,
    permits: Arc<Semaphore>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

fn content_id(bytes: &[u8]) -> String {
    let digest = hex::encode(Sha256::digest(bytes));
    digest[..ID_HEX].to_string()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ServiceError + '_ {
    move |source| ServiceError::DataDir {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), ServiceError> {
    let dir = path.parent().expect("data files live in a directory");
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    std::io::Write::write_all(&mut tmp, text.as_bytes()).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| io_err(path)(e.error))?;
    Ok(())
}

impl AppState {
    /// Opens (creating if needed) the data directory and reloads stored
    /// cases and finished jobs.
    pub fn open(config: ServiceConfig) -> Result<Self, ServiceError> {
        let cases_dir = config.data_dir.join("cases");
        let results_dir = config.data_dir.join("results");
        for dir in [&cases_dir, &results_dir] {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let mut cases = BTreeMap::new();
        for entry in std::fs::read_dir(&cases_dir).map_err(io_err(&cases_dir))? {
            let path = entry.map_err(io_err(&cases_dir))?.path();
            let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_string) else {
                continue;
            };
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
            let network = read_network_json(&text).map_err(|e| ServiceError::Corrupt {
                path: path.clone(),
                message: e.to_string(),
            })?;
            cases.insert(id, Arc::new(network));
        }
        let mut jobs = BTreeMap::new();
        for entry in std::fs::read_dir(&results_dir).map_err(io_err(&results_dir))? {
            let path = entry.map_err(io_err(&results_dir))?.path();
            if !path.to_string_lossy().ends_with(".meta.json") {
                continue;
            }
            let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
            let record: JobRecord = serde_json::from_str(&text).map_err(|e| ServiceError::Corrupt {
                path: path.clone(),
                message: e.to_string(),
            })?;
            jobs.insert(
                record.id.clone(),
                JobEntry {
                    record,
                    cancelled: Arc::default(),
                },
            );
        }
        let workers = config.workers.max(1);
        Ok(Self {
            inner: Arc::new(Inner {
                config,
                cases: RwLock::new(cases),
                jobs: Mutex::new(jobs),
                permits: Arc::new(Semaphore::new(workers)),
            }),
        })
    }

    fn results_dir(&self) -> PathBuf {
        self.inner.config.data_dir.join("results")
    }

    fn case(&self, id: &str) -> Option<Arc<Network>> {
        self.inner.cases.read().expect("case lock").get(id).cloned()
    }

    fn record(&self, id: &str) -> Option<JobRecord> {
        self.inner.jobs.lock().expect("job lock").get(id).map(|e| e.record.clone())
    }

    fn update(&self, id: &str, f: impl FnOnce(&mut JobRecord)) {
        if let Some(e) = self.inner.jobs.lock().expect("job lock").get_mut(id) {
            f(&mut e.record);
        }
    }

    pub fn add_case(&self, network: Network) -> Result<CaseSummary, ApiError> {
        let text = write_network_json(&network);
        let id = content_id(text.as_bytes());
        let path = self.inner.config.data_dir.join("cases").join(format!("{id}.json"));
        if !path.exists() {
            write_file(&path, &text).map_err(ApiError::internal)?;
        }
        let summary = CaseSummary::of(&id, &network);
        self.inner.cases.write().expect("case lock").insert(id, Arc::new(network));
        Ok(summary)
    }

    pub fn submit(&self, request: SubmitRequest) -> Result<JobRecord, ApiError> {
        let network = self
            .case(&request.case_id)
            .ok_or_else(|| ApiError::not_found(format!("unknown case {}", request.case_id)))?;
        let task = Task::new(&network, request.kind, &request.params, &self.inner.config.solver)?;
        let params = serde_json::to_value(&request.params).expect("params serialize");
        let key = serde_json::json!({"kind": request.kind, "case": request.case_id, "params": params});
        let id = content_id(key.to_string().as_bytes());

        let mut jobs = self.inner.jobs.lock().expect("job lock");
        if let Some(existing) = jobs.get(&id) {
            if existing.record.state != JobState::Failed {
                return Ok(existing.record.clone());
            }
        }
        let record = JobRecord {
            id: id.clone(),
            kind: request.kind,
            case_id: request.case_id,
            params,
            state: JobState::Queued,
            progress: 0.0,
            result_ref: None,
            message: None,
            timings: JobTimings {
                submitted_at: now(),
                ..Default::default()
            },
        };
        let cancelled = Arc::new(AtomicBool::new(false));
        jobs.insert(
            id.clone(),
            JobEntry {
                record: record.clone(),
                cancelled: cancelled.clone(),
            },
        );
        drop(jobs);

        let state = self.clone();
        tokio::spawn(async move { state.run(id, network, task, cancelled).await });
        Ok(record)
    }

    async fn run(self, id: String, network: Arc<Network>, task: Task, cancelled: Arc<AtomicBool>) {
        let _permit = self.inner.permits.clone().acquire_owned().await.expect("semaphore open");
        if cancelled.load(Ordering::SeqCst) {
            return;
        }
        self.update(&id, |r| {
            r.state = JobState::Running;
            r.timings.started_at = Some(now());
        });
        let progress = {
            let state = self.clone();
            let id = id.clone();
            move |fraction: f64| state.update(&id, |r| r.progress = fraction)
        };
        let outcome = tokio::task::spawn_blocking(move || task.execute(&network, &progress)).await;
        if cancelled.load(Ordering::SeqCst) {
            return;
        }
        let (state, document, message) = match outcome {
            Ok(Ok(done)) => done,
            Ok(Err(e)) => (JobState::Failed, None, Some(e.to_string())),
            Err(e) => (JobState::Failed, None, Some(format!("job panicked: {e}"))),
        };
        let mut record = None;
        self.update(&id, |r| {
            r.state = state;
            r.progress = 1.0;
            r.message = message;
            r.timings.finished_at = Some(now());
            if document.is_some() {
                r.result_ref = Some(format!("/api/jobs/{}/result", r.id));
            }
            record = Some(r.clone());
        });
        let (Some(record), Some(document)) = (record, document) else {
            return;
        };
        let dir = self.results_dir();
        let stored = write_file(&dir.join(format!("{id}.json")), &document).and_then(|_| {
            let meta = serde_json::to_string_pretty(&record).expect("record serializes");
            write_file(&dir.join(format!("{id}.meta.json")), &meta)
        });
        if let Err(e) = stored {
            log::error!("job {id}: {e}");
        }
    }

    fn result(&self, id: &str) -> Result<String, ApiError> {
        let record = self
            .record(id)
            .ok_or_else(|| ApiError::not_found(format!("unknown job {id}")))?;
        if !record.state.finished() {
            return Err(ApiError::new(StatusCode::CONFLICT, "not_ready", format!("job {id} is {:?}", record.state)));
        }
        if record.result_ref.is_none() {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "no_result",
                record.message.unwrap_or_else(|| "job produced no result".into()),
            ));
        }
        let path = self.results_dir().join(format!("{id}.json"));
        std::fs::read_to_string(&path).map_err(|e| ApiError::internal(format!("{}: {e}", path.display())))
    }

    fn cancel(&self, id: &str) -> Result<JobRecord, ApiError> {
        let mut jobs = self.inner.jobs.lock().expect("job lock");
        let entry = jobs
            .get_mut(id)
            .ok_or_else(|| ApiError::not_found(format!("unknown job {id}")))?;
        if !entry.record.state.finished() {
            entry.cancelled.store(true, Ordering::SeqCst);
            entry.record.state = JobState::Failed;
            entry.record.message = Some("cancelled".into());
            entry.record.timings.finished_at = Some(now());
        }
        Ok(entry.record.clone())
    }
}

/// A validated job, ready to run on a worker.
struct Task {
    kind: JobKind,
    params: PlanningParams,
    contingencies: ContingencySet,
    plan: Option<ShutoffPlan>,
    alpha_grid: Vec<f64>,
    beta_grid: Vec<f64>,
    options: SolverOptions,
}

type TaskOutput = (JobState, Option<String>, Option<String>);

impl Task {
    fn new(network: &Network, kind: JobKind, p: &JobParams, base: &SolverOptions) -> Result<Self, ApiError> {
        let fraction = |name: &str, v: Option<f64>, required: bool| -> Result<f64, ApiError> {
            match v {
                Some(x) if (0.0..=1.0).contains(&x) => Ok(x),
                Some(x) => Err(ApiError::bad_request(format!("{name} {x} outside [0,1]"))),
                None if required => Err(ApiError::bad_request(format!("{name} is required for {kind:?}"))),
                None => Ok(0.0),
            }
        };
        let needs_alpha = matches!(kind, JobKind::SolveOps | JobKind::SolveScops);
        let alpha = fraction("alpha", p.alpha, needs_alpha)?;
        let beta = fraction("beta", p.beta, kind == JobKind::SolveScops)?;
        let mut params = PlanningParams::new(alpha, beta);
        if p.pflex.is_some() {
            params.flex_override = Some(fraction("pflex", p.pflex, false)?);
        }
        let grid = |name: &str, g: &Option<Vec<f64>>| -> Result<Vec<f64>, ApiError> {
            match g {
                Some(v) if !v.is_empty() => {
                    for &x in v {
                        fraction(name, Some(x), true)?;
                    }
                    Ok(v.clone())
                }
                _ if kind == JobKind::Sweep => Err(ApiError::bad_request(format!("{name} must be a nonempty list"))),
                _ => Ok(Vec::new()),
            }
        };
        let alpha_grid = grid("alpha_grid", &p.alpha_grid)?;
        let beta_grid = grid("beta_grid", &p.beta_grid)?;
        let policy = match &p.contingencies {
            None => ContingencyPolicy::AllNonBridge,
            Some(ContingencySpec::Named(n)) if n == "non-bridge" => ContingencyPolicy::AllNonBridge,
            Some(ContingencySpec::Named(n)) => {
                return Err(ApiError::bad_request(format!("unknown contingency set `{n}`")))
            }
            Some(ContingencySpec::Explicit(list)) => ContingencyPolicy::Explicit(list.clone()),
        };
        let mut contingencies =
            build_contingency_set(network, policy).map_err(|e| ApiError::bad_request(e.to_string()))?;
        if let Some(n) = p.max_contingencies {
            contingencies = contingencies.truncated(n);
        }
        if kind == JobKind::Evaluate {
            let plan = p.plan.as_ref().ok_or_else(|| ApiError::bad_request("evaluate needs a plan"))?;
            plan.check_consistency(network)
                .map_err(|e| ApiError::bad_request(e.to_string()))?;
        }
        let mut options = base.clone();
        if let Some(t) = p.time_limit {
            let t = Duration::try_from_secs_f64(t).map_err(|e| ApiError::bad_request(format!("time_limit: {e}")))?;
            options.time_limit = Some(options.time_limit.map_or(t, |b| b.min(t)));
        }
        Ok(Self {
            kind,
            params,
            contingencies,
            plan: p.plan.clone(),
            alpha_grid,
            beta_grid,
            options,
        })
    }

    fn execute(&self, network: &Network, progress: &(dyn Fn(f64) + Sync)) -> Result<TaskOutput, AnalysisError> {
        let flex = self.params.flex_override;
        match self.kind {
            JobKind::SolveOps | JobKind::SolveScops => {
                let problem = if self.kind == JobKind::SolveOps { Problem::Ops } else { Problem::Scops };
                let out = solve_plan(network, problem, &self.params, &self.contingencies, &self.options)?;
                let (state, message) = match out.status {
                    SolveStatus::Optimal => (JobState::Done, None),
                    SolveStatus::Infeasible => (
                        JobState::Infeasible,
                        Some("no shutoff plan meets the load and contingency requirements".to_string()),
                    ),
                    s => (JobState::Done, Some(format!("solver stopped: {}", s.as_str()))),
                };
                Ok((state, Some(write_document(&out)), message))
            }
            JobKind::Evaluate => {
                let plan = self.plan.as_ref().expect("validated at submit");
                let report = evaluate_plan(network, plan, &self.contingencies, flex, &self.options)?;
                Ok((JobState::Done, Some(write_document(&report)), None))
            }
            JobKind::Sweep => {
                let total = self.alpha_grid.len() * self.beta_grid.len();
                let done = AtomicUsize::new(0);
                let tick = || {
                    let n = done.fetch_add(1, Ordering::SeqCst) + 1;
                    progress(n as f64 / total as f64);
                };
                let result = sweep_with_progress(
                    network,
                    &self.alpha_grid,
                    &self.beta_grid,
                    flex,
                    &self.contingencies,
                    &self.options,
                    &tick,
                )?;
                Ok((JobState::Done, Some(write_document(&result)), None))
            }
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    fn internal(message: impl ToString) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Json(serde_json::json!({"code": self.code, "message": self.message}));
        (self.status, body).into_response()
    }
}

fn json_text(text: String) -> Response {
    ([(axum::http::header::CONTENT_TYPE, "application/json")], text).into_response()
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &str) -> Result<T, ApiError> {
    serde_json::from_str(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

async fn list_cases(State(state): State<AppState>) -> Json<Vec<CaseSummary>> {
    let cases = state.inner.cases.read().expect("case lock");
    Json(cases.iter().map(|(id, n)| CaseSummary::of(id, n)).collect())
}

async fn upload_case(State(state): State<AppState>, body: String) -> Result<(StatusCode, Json<CaseSummary>), ApiError> {
    let network = read_network_json(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok((StatusCode::CREATED, Json(state.add_case(network)?)))
}

async fn get_case(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let network = state
        .case(&id)
        .ok_or_else(|| ApiError::not_found(format!("unknown case {id}")))?;
    Ok(json_text(write_network_json(&network)))
}

async fn submit_job(State(state): State<AppState>, body: String) -> Result<(StatusCode, Json<JobRecord>), ApiError> {
    let request: SubmitRequest = parse_body(&body)?;
    Ok((StatusCode::ACCEPTED, Json(state.submit(request)?)))
}

async fn list_jobs(State(state): State<AppState>) -> Json<Vec<JobRecord>> {
    let jobs = state.inner.jobs.lock().expect("job lock");
    Json(jobs.values().map(|e| e.record.clone()).collect())
}

async fn poll_job(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<JobRecord>, ApiError> {
    state
        .record(&id)
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("unknown job {id}")))
}

async fn job_result(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    state.result(&id).map(json_text)
}

async fn cancel_job(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<JobRecord>, ApiError> {
    state.cancel(&id).map(Json)
}

async fn api_not_found() -> ApiError {
    ApiError::not_found("no such endpoint")
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/api/cases", get(list_cases).post(upload_case))
        .route("/api/cases/{id}", get(get_case))
        .route("/api/jobs", get(list_jobs).post(submit_job))
        .route("/api/jobs/{id}", get(poll_job).delete(cancel_job))
        .route("/api/jobs/{id}/result", get(job_result))
        .route("/api/{*rest}", axum::routing::any(api_not_found));
    let app = match &state.inner.config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.with_state(state)
}

pub async fn serve(config: ServiceConfig, addr: &str) -> Result<(), ServiceError> {
    let state = AppState::open(config)?;
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| ServiceError::Bind {
        addr: addr.to_string(),
        source,
    })?;
    log::info!("listening on {addr}");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServiceError::Serve)
}
