//! HTTP facade over live sessions.
//!
//! The store directory holds one event log per session and nothing else.
//! Every command appends the events it produced before the response is
//! sent, and startup replays whatever logs are present.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pharmasim_core::client::{list_inquiry_options, ClientError, InquiryOption};
use pharmasim_core::clock::{Clock, SystemClock};
use pharmasim_core::pharmacist::{Condition, DialoguePhase, LlmProvider, PharmacistAgent};
use pharmasim_core::scenario::{Phase, Resource, ScenarioSet, SolutionTable};
use pharmasim_core::session::{
    encode_event, read_events, DiagnosisEntry, DiagnosisForm, Initiator, Module, Progress, Session, SessionError,
};
use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, RwLock};

use crate::provider::ProviderSettings;

#[derive(Debug, Clone)]
pub struct ApiConfig {
    pub bind: SocketAddr,
    /// Directory with `A.json` .. `C2.json`; the bundled set when absent.
    pub scenario_dir: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub provider: ProviderSettings,
    pub store_dir: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot load scenarios: {0}")]
    Scenarios(#[from] pharmasim_core::scenario::ScenarioSetError),
    #[error("cannot load templates: {0}")]
    Templates(#[from] pharmasim_core::pharmacist::TemplateError),
    #[error("session store {path}: {source}")]
    Store {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot recover session log {path}: {reason}")]
    Recovery { path: PathBuf, reason: String },
    #[error("provider: {0}")]
    Provider(String),
}

struct Slot {
    session: Session,
    /// Events already on disk.
    persisted: usize,
    path: PathBuf,
}

impl Slot {
    /// Appends the unpersisted tail of the log.
    fn flush(&mut self) -> std::io::Result<()> {
        let tail = &self.session.events()[self.persisted..];
        if tail.is_empty() {
            return Ok(());
        }
        let mut buf = String::new();
        for e in tail {
            buf.push_str(&encode_event(e));
            buf.push('\n');
        }
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        f.write_all(buf.as_bytes())?;
        f.flush()?;
        self.persisted = self.session.events().len();
        Ok(())
    }
}

pub struct AppState {
    scenarios: Arc<ScenarioSet>,
    agent: PharmacistAgent,
    provider: Arc<dyn LlmProvider>,
    clock: Arc<dyn Clock>,
    store_dir: PathBuf,
    sessions: RwLock<HashMap<String, Arc<Mutex<Slot>>>>,
}

impl AppState {
    pub fn new(
        scenarios: Arc<ScenarioSet>,
        agent: PharmacistAgent,
        provider: Arc<dyn LlmProvider>,
        clock: Arc<dyn Clock>,
        store_dir: PathBuf,
    ) -> Result<Self, ConfigError> {
        fs::create_dir_all(&store_dir).map_err(|source| ConfigError::Store {
            path: store_dir.clone(),
            source,
        })?;
        let sessions = recover(&store_dir, &scenarios, &clock)?;
        Ok(AppState {
            scenarios,
            agent,
            provider,
            clock,
            store_dir,
            sessions: RwLock::new(sessions),
        })
    }

    pub fn from_config(config: &ApiConfig) -> Result<Self, ConfigError> {
        let scenarios = match &config.scenario_dir {
            Some(dir) => ScenarioSet::load_dir(dir)?,
            None => ScenarioSet::builtin(),
        };
        let agent = match &config.templates {
            Some(path) => PharmacistAgent::new(
                pharmasim_core::pharmacist::PromptTemplateSet::load_file(path)?,
                Default::default(),
            ),
            None => PharmacistAgent::with_defaults(),
        };
        let provider = config.provider.build().map_err(|e| ConfigError::Provider(e.to_string()))?;
        Self::new(
            Arc::new(scenarios),
            agent,
            provider,
            Arc::new(SystemClock),
            config.store_dir.clone(),
        )
    }

    pub async fn session_count(&self) -> usize {
        self.sessions.read().await.len()
    }

    /// Writes any events not yet on disk, for every session.
    pub async fn flush_all(&self) -> std::io::Result<()> {
        let slots: Vec<_> = self.sessions.read().await.values().cloned().collect();
        for slot in slots {
            slot.lock().await.flush()?;
        }
        Ok(())
    }

    async fn slot(&self, id: &str) -> Result<Arc<Mutex<Slot>>, ApiError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::UnknownSession(id.to_string()))
    }
}

fn recover(
    dir: &Path,
    scenarios: &Arc<ScenarioSet>,
    clock: &Arc<dyn Clock>,
) -> Result<HashMap<String, Arc<Mutex<Slot>>>, ConfigError> {
    let store_err = |source| ConfigError::Store {
        path: dir.to_path_buf(),
        source,
    };
    let mut out = HashMap::new();
    for entry in fs::read_dir(dir).map_err(store_err)? {
        let path = entry.map_err(store_err)?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
            continue;
        }
        let recovery = |reason: String| ConfigError::Recovery {
            path: path.clone(),
            reason,
        };
        let file = fs::File::open(&path).map_err(|e| recovery(e.to_string()))?;
        let events = read_events(std::io::BufReader::new(file)).map_err(|e| recovery(e.to_string()))?;
        let session =
            Session::replay(events, scenarios.clone(), clock.clone()).map_err(|e| recovery(e.to_string()))?;
        let id = session.id().to_string();
        if path.file_stem().and_then(|s| s.to_str()) != Some(id.as_str()) {
            return Err(recovery(format!("file name does not match session id {id:?}")));
        }
        let persisted = session.events().len();
        out.insert(
            id,
            Arc::new(Mutex::new(Slot {
                session,
                persisted,
                path,
            })),
        );
    }
    Ok(out)
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("message is empty")]
    EmptyMessage,
    #[error("cannot write session log: {0}")]
    Store(#[from] std::io::Error),
    #[error("worker failed: {0}")]
    Worker(String),
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

impl ApiError {
    /// HTTP status and machine-readable reason.
    pub fn classify(&self) -> (StatusCode, &'static str) {
        use SessionError as S;
        match self {
            ApiError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            ApiError::EmptyMessage => (StatusCode::UNPROCESSABLE_ENTITY, "empty_message"),
            ApiError::Store(_) => (StatusCode::INTERNAL_SERVER_ERROR, "store_failed"),
            ApiError::Worker(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
            ApiError::Session(e) => match e {
                S::SessionFinished => (StatusCode::CONFLICT, "session_finished"),
                S::WrongModule { .. } => (StatusCode::CONFLICT, "wrong_module"),
                S::SameModule(_) => (StatusCode::CONFLICT, "same_module"),
                S::GateDenied { .. } => (StatusCode::CONFLICT, "diagnosis_gate_denied"),
                S::ModuleUnavailableInPhase { .. } => (StatusCode::CONFLICT, "module_unavailable_in_phase"),
                S::Client(ClientError::UnknownPersona(_)) => (StatusCode::NOT_FOUND, "unknown_persona"),
                S::Client(ClientError::UnknownTopic { .. }) => (StatusCode::NOT_FOUND, "unknown_topic"),
                S::UnknownResource(_) => (StatusCode::NOT_FOUND, "unknown_resource"),
                S::EmptyDiagnosis => (StatusCode::UNPROCESSABLE_ENTITY, "empty_diagnosis"),
                S::Step(_) => (StatusCode::BAD_GATEWAY, "pharmacist_unavailable"),
                S::MissingScenario(_) | S::InvalidEvent(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, reason) = self.classify();
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        let body = ErrorBody {
            error: reason.to_string(),
            message: self.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateSession {
    pub student_id: String,
    pub condition: Condition,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub phase: Phase,
    pub module: Module,
}

#[derive(Debug, Deserialize)]
pub struct OptionsQuery {
    pub persona: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PersonaOptions {
    pub persona: String,
    pub display_name: String,
    pub options: Vec<InquiryOption>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AskRequest {
    pub persona: String,
    pub topic: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Coverage {
    pub checklist_covered: Vec<String>,
    pub checklist_open: Vec<String>,
    pub interpersonal_covered: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AskResponse {
    pub answer: String,
    pub coverage: Coverage,
    /// Differs from client_inquiry when the checklist completion moved the
    /// student to the mentor.
    pub module: Module,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChatRequest {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChatResponse {
    pub reply: String,
    pub phase_state: DialoguePhase,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SwitchRequest {
    pub to: Module,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SwitchResponse {
    pub module: Module,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DiagnosisRequest {
    pub entries: Vec<DiagnosisEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DiagnosisResponse {
    pub solution_table: SolutionTable,
    pub next_phase: Option<Phase>,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/options", get(options))
        .route("/sessions/{id}/ask", post(ask))
        .route("/sessions/{id}/chat", post(chat))
        .route("/sessions/{id}/switch", post(switch))
        .route("/sessions/{id}/diagnosis", post(diagnosis))
        .route("/sessions/{id}/progress", get(progress))
        .route("/sessions/{id}/resources/{resource}", get(resource))
        .with_state(state)
}

async fn create_session(State(app): State<Arc<AppState>>, Json(req): Json<CreateSession>) -> ApiResult<Created> {
    let id = uuid::Uuid::new_v4().to_string();
    let session = Session::start(
        id.clone(),
        req.student_id,
        req.condition,
        app.scenarios.clone(),
        app.clock.clone(),
    )?;
    let mut slot = Slot {
        path: app.store_dir.join(format!("{id}.jsonl")),
        persisted: 0,
        session,
    };
    slot.flush()?;
    let created = Created {
        session_id: id.clone(),
        phase: slot.session.state().phase,
        module: slot.session.state().active_module,
    };
    app.sessions.write().await.insert(id, Arc::new(Mutex::new(slot)));
    Ok(Json(created))
}

async fn options(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<OptionsQuery>,
) -> ApiResult<Vec<PersonaOptions>> {
    let slot = app.slot(&id).await?;
    let guard = slot.lock().await;
    let scenario = guard.session.scenario();
    let personas: Vec<_> = match &q.persona {
        Some(p) => vec![scenario
            .persona(p)
            .ok_or_else(|| SessionError::Client(ClientError::UnknownPersona(p.clone())))?],
        None => scenario.personas.iter().collect(),
    };
    let mut out = Vec::with_capacity(personas.len());
    for p in personas {
        out.push(PersonaOptions {
            persona: p.id.clone(),
            display_name: p.display_name.clone(),
            options: list_inquiry_options(scenario, &p.id).map_err(SessionError::from)?,
        });
    }
    Ok(Json(out))
}

/// Runs a command under the session lock and persists what it appended.
/// Rejected commands append nothing.
async fn command<T>(
    app: &AppState,
    id: &str,
    f: impl FnOnce(&mut Session) -> Result<T, SessionError>,
) -> Result<(T, Progress), ApiError> {
    let slot = app.slot(id).await?;
    let mut guard = slot.lock().await;
    let out = f(&mut guard.session)?;
    guard.flush()?;
    Ok((out, guard.session.progress()))
}

fn coverage(p: Progress) -> Coverage {
    Coverage {
        checklist_covered: p.checklist_covered,
        checklist_open: p.checklist_open,
        interpersonal_covered: p.interpersonal_covered,
    }
}

async fn ask(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<AskRequest>,
) -> ApiResult<AskResponse> {
    let (result, progress) = command(&app, &id, |s| s.ask(&req.persona, &req.topic)).await?;
    Ok(Json(AskResponse {
        answer: result.answer_text,
        module: progress.active_module,
        coverage: coverage(progress),
    }))
}

async fn chat(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<ChatRequest>,
) -> ApiResult<ChatResponse> {
    if req.text.trim().is_empty() {
        return Err(ApiError::EmptyMessage);
    }
    let slot = app.slot(&id).await?;
    let mut guard = slot.lock_owned().await;
    let worker = app.clone_handles();
    // The provider call blocks; the session stays locked while it runs.
    let (guard, reply) = tokio::task::spawn_blocking(move || {
        let reply = guard.session.chat(&req.text, &worker.0, worker.1.as_ref());
        (guard, reply)
    })
    .await
    .map_err(|e| ApiError::Worker(e.to_string()))?;
    let mut guard = guard;
    let reply = reply?;
    guard.flush()?;
    Ok(Json(ChatResponse {
        reply,
        phase_state: guard.session.state().pharmacist.phase,
    }))
}

impl AppState {
    fn clone_handles(&self) -> (PharmacistAgent, Arc<dyn LlmProvider>) {
        (self.agent.clone(), self.provider.clone())
    }
}

async fn switch(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<SwitchRequest>,
) -> ApiResult<SwitchResponse> {
    let (_, progress) = command(&app, &id, |s| s.switch_module(req.to, Initiator::Student)).await?;
    Ok(Json(SwitchResponse {
        module: progress.active_module,
    }))
}

async fn diagnosis(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<DiagnosisRequest>,
) -> ApiResult<DiagnosisResponse> {
    let form = DiagnosisForm { entries: req.entries };
    let (outcome, _) = command(&app, &id, |s| s.submit_diagnosis(form)).await?;
    Ok(Json(DiagnosisResponse {
        solution_table: outcome.solution,
        next_phase: outcome.next_phase,
    }))
}

async fn progress(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Progress> {
    let slot = app.slot(&id).await?;
    let guard = slot.lock().await;
    Ok(Json(guard.session.progress()))
}

async fn resource(
    State(app): State<Arc<AppState>>,
    UrlPath((id, resource)): UrlPath<(String, String)>,
) -> ApiResult<Resource> {
    let (doc, _) = command(&app, &id, |s| s.open_resource(&resource)).await?;
    Ok(Json(doc))
}

/// Binds, serves until `shutdown` resolves, then flushes every log.
pub async fn serve(
    config: ApiConfig,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> anyhow::Result<()> {
    let state = Arc::new(AppState::from_config(&config)?);
    tracing::info!(sessions = state.session_count().await, "recovered sessions");
    let listener = tokio::net::TcpListener::bind(config.bind)
        .await
        .map_err(|e| anyhow::anyhow!("cannot bind {}: {e}", config.bind))?;
    run(listener, state, shutdown).await
}

pub async fn run(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> anyhow::Result<()> {
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(shutdown)
        .await?;
    state.flush_all().await?;
    tracing::info!("session logs flushed");
    Ok(())
}
