//! Human-in-the-loop sessions over HTTP/JSON.
//!
//! `SessionManager` owns the sessions and the event log and is usable
//! without HTTP; `router` wraps it in the `/v1` API. Each session has one
//! writer lock, so choices on it are serialized, and readers only clone the
//! current immutable snapshot, so they never wait on a running batch.

pub mod payload;
pub mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use molone_core::engine::{Choice, EngineConfig, PboSession, Phase};
use molone_core::{BenchmarkId, BenchmarkProblem};
use serde::Deserialize;
use serde_json::{json, Value};

use payload::{to_wire, ChoiceResponse, CreateResponse, FinalSummary, Mode, PairPayload, Progress};
use store::{Event, EventStore};

pub const DEFAULT_BUDGET: usize = 10;
pub const MAX_BUDGET: usize = 256;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: Option<PathBuf>,
    pub max_sessions: usize,
    /// Template for new sessions; stage layout and the explanation flag are set per session.
    pub engine: EngineConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            data_dir: None,
            max_sessions: 1000,
            engine: EngineConfig::default(),
        }
    }
}

#[derive(Debug)]
pub enum ServiceError {
    NotFound(String),
    BadRequest(String),
    Conflict(Value),
    Capacity(usize),
    Internal(String),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Capacity(_) => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn body(&self) -> Value {
        match self {
            ServiceError::NotFound(id) => json!({"error": format!("unknown session '{id}'")}),
            ServiceError::BadRequest(m) => json!({"error": m}),
            ServiceError::Conflict(v) => v.clone(),
            ServiceError::Capacity(n) => {
                json!({"error": format!("session capacity of {n} reached")})
            }
            ServiceError::Internal(m) => json!({"error": m}),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.body())).into_response()
    }
}

impl From<crate::HarnessError> for ServiceError {
    fn from(e: crate::HarnessError) -> Self {
        ServiceError::Internal(e.to_string())
    }
}

impl From<molone_core::Error> for ServiceError {
    fn from(e: molone_core::Error) -> Self {
        ServiceError::Internal(e.to_string())
    }
}

type SvcResult<T> = std::result::Result<T, ServiceError>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub benchmark: String,
    pub mode: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub comparisons: Option<usize>,
    /// Overrides the default participant hint.
    #[serde(default)]
    pub note: Option<String>,
    /// `false` leaves the hint out entirely.
    #[serde(default)]
    pub include_note: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChoiceRequest {
    pub pair_id: u64,
    pub choice: String,
}

#[derive(Debug, Clone)]
pub struct SessionEntry {
    pub id: String,
    pub benchmark: BenchmarkId,
    pub mode: Mode,
    pub budget: usize,
    pub note: Option<String>,
    pub created_at_ms: u64,
    pub updated_at_ms: u64,
    pub session: PboSession,
}

/// `n` comparisons as `stages × rounds` with the most rounds per stage up to 8.
pub fn stage_layout(n: usize) -> (usize, usize) {
    let rounds = (1..=8.min(n)).rev().find(|r| n % r == 0).unwrap_or(1);
    (n / rounds, rounds)
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl SessionEntry {
    fn progress(&self) -> Progress {
        Progress {
            comparisons_done: self.session.comparisons_done(),
            budget: self.budget,
        }
    }

    fn final_summary(&self) -> Value {
        json!({
            "error": "session is done",
            "phase": Phase::Done,
            "summary": to_wire(&FinalSummary {
                comparisons_done: self.session.comparisons_done(),
                best_utility_so_far: self.session.best_so_far(),
                trajectory: self.session.trajectory().to_vec(),
            }),
        })
    }

    pub fn pair_payload(&self) -> SvcResult<PairPayload> {
        let pending = self
            .session
            .pending()
            .ok_or_else(|| ServiceError::Conflict(self.final_summary()))?;
        let matrix = match self.mode {
            Mode::WithExplanations => pending.bundle.as_ref().map(|b| &b.matrix),
            Mode::WithoutExplanations => None,
        };
        Ok(PairPayload::new(
            &pending.pair,
            matrix,
            self.note.clone(),
            self.progress(),
        ))
    }

    pub fn status(&self) -> Value {
        to_wire(&json!({
            "session_id": self.id,
            "benchmark": self.benchmark,
            "seed": self.session.seed(),
            "mode": self.mode,
            "phase": self.session.phase(),
            "comparisons_done": self.session.comparisons_done(),
            "budget": self.budget,
            "trajectory": self.session.trajectory(),
            "note": self.note,
            "config": self.session.config(),
            "created_at_ms": self.created_at_ms,
            "updated_at_ms": self.updated_at_ms,
        }))
    }
}

struct Slot {
    writer: Mutex<()>,
    snapshot: RwLock<Arc<SessionEntry>>,
}

impl Slot {
    fn new(entry: SessionEntry) -> Self {
        Self {
            writer: Mutex::new(()),
            snapshot: RwLock::new(Arc::new(entry)),
        }
    }

    fn get(&self) -> Arc<SessionEntry> {
        self.snapshot
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .clone()
    }

    fn set(&self, entry: SessionEntry) {
        *self.snapshot.write().unwrap_or_else(|p| p.into_inner()) = Arc::new(entry);
    }
}

pub struct SessionManager {
    config: ServiceConfig,
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
    store: Option<EventStore>,
}

fn parse_choice(s: &str) -> SvcResult<Choice> {
    match s {
        "A" | "a" => Ok(Choice::A),
        "B" | "b" => Ok(Choice::B),
        _ => Err(ServiceError::BadRequest(format!(
            "choice must be \"A\" or \"B\" (got {s:?})"
        ))),
    }
}

fn parse_mode(s: &str) -> SvcResult<Mode> {
    match s {
        "with_explanations" => Ok(Mode::WithExplanations),
        "without_explanations" => Ok(Mode::WithoutExplanations),
        _ => Err(ServiceError::BadRequest(format!(
            "mode must be \"with_explanations\" or \"without_explanations\" (got {s:?})"
        ))),
    }
}

impl SessionManager {
    /// Opens the event log (if any) and replays it.
    pub fn new(config: ServiceConfig) -> crate::Result<Self> {
        let store = config
            .data_dir
            .as_deref()
            .map(EventStore::open)
            .transpose()?;
        let manager = Self {
            config,
            sessions: RwLock::new(HashMap::new()),
            store,
        };
        if let Some(store) = &manager.store {
            let events = store.read_all()?;
            manager.replay(events)?;
        }
        Ok(manager)
    }

    fn replay(&self, events: Vec<Event>) -> crate::Result<()> {
        let corrupt = |m: String| crate::HarnessError::Data(format!("event log: {m}"));
        let mut sessions = self.sessions.write().unwrap_or_else(|p| p.into_inner());
        for event in events {
            let id = event.session_id().to_string();
            match event {
                Event::Create {
                    ts_ms,
                    benchmark,
                    seed,
                    mode,
                    budget,
                    note,
                    config,
                    ..
                } => {
                    let session =
                        PboSession::initialize(BenchmarkProblem::new(benchmark), seed, *config)?;
                    let entry = SessionEntry {
                        id: id.clone(),
                        benchmark,
                        mode,
                        budget,
                        note,
                        created_at_ms: ts_ms,
                        updated_at_ms: ts_ms,
                        session,
                    };
                    sessions.insert(id, Arc::new(Slot::new(entry)));
                }
                Event::Choice {
                    ts_ms,
                    pair_id,
                    choice,
                    ..
                } => {
                    let entry = sessions
                        .get(&id)
                        .ok_or_else(|| corrupt(format!("choice for unknown session {id}")))?;
                    let mut e = SessionEntry::clone(&entry.get());
                    e.session.submit_choice(pair_id, choice)?;
                    e.session
                        .set_last_source(molone_core::pref::ComparisonSource::Human);
                    e.updated_at_ms = ts_ms;
                    entry.set(e);
                }
                Event::PairIssued { pair_id, .. } => {
                    let entry = sessions
                        .get(&id)
                        .ok_or_else(|| corrupt(format!("pair for unknown session {id}")))?;
                    let pending = entry.get().session.pending().map(|p| p.pair.pair_id);
                    if pending != Some(pair_id) {
                        return Err(corrupt(format!(
                            "session {id}: logged pair {pair_id}, replay produced {pending:?}"
                        )));
                    }
                }
                Event::Batch { .. } => {}
            }
        }
        Ok(())
    }

    pub fn session_count(&self) -> usize {
        self.sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .len()
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .keys()
            .cloned()
            .collect();
        ids.sort();
        ids
    }

    fn slot(&self, id: &str) -> SvcResult<Arc<Slot>> {
        self.sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    fn append(&self, events: &[Event]) -> SvcResult<()> {
        match &self.store {
            Some(s) => s.append(events).map_err(Into::into),
            None => Ok(()),
        }
    }

    pub fn create(&self, req: CreateRequest) -> SvcResult<CreateResponse> {
        let benchmark: BenchmarkId = req
            .benchmark
            .parse()
            .map_err(|e: molone_core::Error| ServiceError::BadRequest(e.to_string()))?;
        let mode = parse_mode(&req.mode)?;
        let budget = req.comparisons.unwrap_or(DEFAULT_BUDGET);
        if budget == 0 || budget > MAX_BUDGET {
            return Err(ServiceError::BadRequest(format!(
                "comparisons must be in 1..={MAX_BUDGET}"
            )));
        }
        if self.session_count() >= self.config.max_sessions {
            return Err(ServiceError::Capacity(self.config.max_sessions));
        }
        let problem = BenchmarkProblem::new(benchmark);
        let note = match req.include_note {
            Some(false) => None,
            _ => Some(req.note.unwrap_or_else(|| problem.utility_note())),
        };
        let seed = req
            .seed
            .unwrap_or_else(|| uuid::Uuid::new_v4().as_u64_pair().0);
        let (stages, rounds_per_stage) = stage_layout(budget);
        let config = EngineConfig {
            stages,
            rounds_per_stage,
            explanations: mode == Mode::WithExplanations,
            ..self.config.engine.clone()
        };
        let session = PboSession::initialize(problem, seed, config.clone())?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let ts = now_ms();
        let entry = SessionEntry {
            id: id.clone(),
            benchmark,
            mode,
            budget,
            note: note.clone(),
            created_at_ms: ts,
            updated_at_ms: ts,
            session,
        };
        let pair = entry.pair_payload()?;
        let mut sessions = self.sessions.write().unwrap_or_else(|p| p.into_inner());
        if sessions.len() >= self.config.max_sessions {
            return Err(ServiceError::Capacity(self.config.max_sessions));
        }
        self.append(&[
            Event::Create {
                session_id: id.clone(),
                ts_ms: ts,
                benchmark,
                seed,
                mode,
                budget,
                note,
                config: Box::new(config),
            },
            Event::PairIssued {
                session_id: id.clone(),
                ts_ms: ts,
                pair_id: pair.pair_id,
            },
        ])?;
        sessions.insert(id.clone(), Arc::new(Slot::new(entry)));
        Ok(CreateResponse {
            session_id: id,
            seed,
            mode,
            budget,
            pair,
        })
    }

    pub fn pair(&self, id: &str) -> SvcResult<PairPayload> {
        self.slot(id)?.get().pair_payload()
    }

    pub fn status(&self, id: &str) -> SvcResult<Value> {
        Ok(self.slot(id)?.get().status())
    }

    /// Current snapshot of a session.
    pub fn snapshot(&self, id: &str) -> SvcResult<Arc<SessionEntry>> {
        Ok(self.slot(id)?.get())
    }

    /// Applies a choice; the log is written before the new state becomes visible.
    pub fn choose(&self, id: &str, req: ChoiceRequest) -> SvcResult<ChoiceResponse> {
        let choice = parse_choice(&req.choice)?;
        let slot = self.slot(id)?;
        let _writer = slot.writer.lock().unwrap_or_else(|p| p.into_inner());
        let e = slot.get();
        let Some(pending) = e.session.pending() else {
            return Err(ServiceError::Conflict(e.final_summary()));
        };
        if pending.pair.pair_id != req.pair_id {
            return Err(ServiceError::Conflict(json!({
                "error": "stale pair_id",
                "given": req.pair_id,
                "pending": pending.pair.pair_id,
            })));
        }
        let mut next = e.session.clone();
        next.submit_choice(req.pair_id, choice)?;
        next.set_last_source(molone_core::pref::ComparisonSource::Human);
        let ts = now_ms();
        let mut events = vec![Event::Choice {
            session_id: id.to_string(),
            ts_ms: ts,
            pair_id: req.pair_id,
            choice,
        }];
        if next.stage_index() > e.session.stage_index() {
            events.push(Event::Batch {
                session_id: id.to_string(),
                ts_ms: ts,
                stage: e.session.stage_index(),
                observations: next.observations().len(),
            });
        }
        if let Some(p) = next.pending() {
            events.push(Event::PairIssued {
                session_id: id.to_string(),
                ts_ms: ts,
                pair_id: p.pair.pair_id,
            });
        }
        self.append(&events)?;
        let entry = SessionEntry {
            session: next,
            updated_at_ms: ts,
            ..SessionEntry::clone(&e)
        };
        let resp = ChoiceResponse {
            accepted: true,
            next_phase: entry.session.phase(),
            progress: entry.progress(),
        };
        slot.set(entry);
        Ok(resp)
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> SvcResult<T> {
    serde_json::from_slice(body)
        .map_err(|e| ServiceError::BadRequest(format!("invalid request body: {e}")))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> SvcResult<T> + Send + 'static,
) -> SvcResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
}

async fn health() -> Json<Value> {
    Json(json!({"status": "ok"}))
}

async fn create(
    State(m): State<Arc<SessionManager>>,
    body: Bytes,
) -> SvcResult<(StatusCode, Json<Value>)> {
    let req: CreateRequest = parse_body(&body)?;
    let resp = blocking(move || m.create(req)).await?;
    Ok((StatusCode::CREATED, Json(to_wire(&resp))))
}

async fn pair(
    State(m): State<Arc<SessionManager>>,
    Path(id): Path<String>,
) -> SvcResult<Json<Value>> {
    Ok(Json(to_wire(&m.pair(&id)?)))
}

async fn choice(
    State(m): State<Arc<SessionManager>>,
    Path(id): Path<String>,
    body: Bytes,
) -> SvcResult<Json<Value>> {
    let req: ChoiceRequest = parse_body(&body)?;
    let resp = blocking(move || m.choose(&id, req)).await?;
    Ok(Json(to_wire(&resp)))
}

async fn status(
    State(m): State<Arc<SessionManager>>,
    Path(id): Path<String>,
) -> SvcResult<Json<Value>> {
    Ok(Json(m.status(&id)?))
}

pub fn router(manager: Arc<SessionManager>) -> Router {
    Router::new()
        .route("/healthz", get(health))
        .route("/v1/healthz", get(health))
        .route("/v1/sessions", post(create))
        .route("/v1/sessions/{id}/pair", get(pair))
        .route("/v1/sessions/{id}/choice", post(choice))
        .route("/v1/sessions/{id}/status", get(status))
        .with_state(manager)
}

/// Serves until ctrl-c.
pub async fn serve(addr: SocketAddr, manager: Arc<SessionManager>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(manager))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
