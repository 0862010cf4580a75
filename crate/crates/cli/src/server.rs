//! HTTP session service.
//!
//! Every session is driven one request at a time; scripted and remote
//! sessions take their verdicts from the feedback oracle, human sessions
//! from `POST /sessions/{id}/feedback`.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use predlearn::agent::{AgentError, BundleManifest, Curriculum, Proposal, Session, SessionStatus, StepOutcome};
use predlearn::dsl::PredicateSource;
use predlearn::oracle::{FeedbackOracle, VariantMode};
use predlearn::tasks::{training_tasks, TrainingManifest};
use predlearn::teacher::{build_teacher, Backend, Naming, TeacherError};
use predlearn::world::DomainId;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::Config;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeacherMode {
    Scripted,
    Human,
    Remote,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub domain: String,
    #[serde(default = "default_mode")]
    pub teacher: TeacherMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tasks")]
    pub tasks: usize,
    #[serde(default)]
    pub varied: bool,
    /// Reasoner behind a human session.
    #[serde(default)]
    pub reasoner: Option<Backend>,
}

fn default_mode() -> TeacherMode {
    TeacherMode::Scripted
}

fn default_tasks() -> usize {
    10
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TextBody {
    text: String,
}

struct Entry {
    session: Session,
    mode: TeacherMode,
    curriculum: Curriculum,
    training: TrainingManifest,
    seed: u64,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    config: Config,
    log_dir: Option<PathBuf>,
    next_id: AtomicU64,
    sessions: Mutex<HashMap<String, Arc<Mutex<Entry>>>>,
}

impl AppState {
    /// Session logs are mirrored under `log_dir` when given.
    pub fn new(config: Config, log_dir: Option<PathBuf>) -> Self {
        AppState {
            inner: Arc::new(Inner {
                config,
                log_dir,
                next_id: AtomicU64::new(1),
                sessions: Mutex::new(HashMap::new()),
            }),
        }
    }

    fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>, ApiError> {
        self.inner
            .sessions
            .lock()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session `{id}`")))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }

    fn conflict(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::CONFLICT, message)
    }

    fn unprocessable(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }
}

impl From<AgentError> for ApiError {
    fn from(e: AgentError) -> Self {
        let status = match &e {
            AgentError::NoEpisode
            | AgentError::EpisodeActive
            | AgentError::AwaitingFeedback
            | AgentError::NothingPending
            | AgentError::UnexpectedFeedback(_) => StatusCode::CONFLICT,
            AgentError::Teacher(TeacherError::Transport(_)) => StatusCode::BAD_GATEWAY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::unprocessable(format!("malformed body: {e}")))
}

/// Runs `f` on the session off the async executor.
async fn with_entry<T: Send + 'static>(
    state: &AppState,
    id: &str,
    f: impl FnOnce(&mut Entry) -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    let entry = state.entry(id)?;
    tokio::task::spawn_blocking(move || {
        let mut e = entry.lock().map_err(|_| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "session poisoned"))?;
        f(&mut e)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/state", get(session_state))
        .route("/sessions/{id}/goal", post(post_goal))
        .route("/sessions/{id}/feedback", post(post_feedback))
        .route("/sessions/{id}/advance", post(advance))
        .route("/sessions/{id}/log", get(session_log))
        .route("/sessions/{id}/bundle", get(session_bundle))
        .with_state(state)
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let req: CreateSession = parse_body(&body)?;
    let domain: DomainId =
        req.domain.parse().map_err(|e: predlearn::world::WorldError| ApiError::unprocessable(e.to_string()))?;
    if req.tasks == 0 {
        return Err(ApiError::unprocessable("tasks must be positive"));
    }
    let inner = state.inner.clone();
    let id = format!("s{}", inner.next_id.fetch_add(1, Ordering::Relaxed));
    let log_path = inner.log_dir.as_ref().map(|d| d.join(format!("{id}.jsonl")));
    let entry = tokio::task::spawn_blocking(move || -> Result<Entry, ApiError> {
        let backend = match (req.teacher, req.reasoner) {
            (TeacherMode::Scripted, _) => Backend::Scripted,
            (TeacherMode::Remote, _) => Backend::Remote,
            (TeacherMode::Human, r) => r.unwrap_or(Backend::Scripted),
        };
        let naming = if req.varied { Naming::ByPhrase } else { Naming::Canonical };
        let teacher_cfg = inner.config.teacher(backend, naming);
        let teacher = build_teacher(&teacher_cfg).map_err(|e| ApiError::unprocessable(e.to_string()))?;
        let source = match backend {
            Backend::Scripted => PredicateSource::Scripted,
            Backend::Remote => PredicateSource::Remote,
        };
        let mut session = Session::new(domain, inner.config.agent(), teacher, source, req.seed);
        if let Some(p) = log_path {
            if let Some(dir) = p.parent() {
                std::fs::create_dir_all(dir)
                    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
            }
            session
                .log_mut()
                .attach(&p)
                .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
        }
        let tasks = training_tasks(domain, req.tasks, req.seed).map_err(|e| ApiError::unprocessable(e.to_string()))?;
        let training = TrainingManifest::from_tasks(&tasks);
        let mode = if req.varied { VariantMode::Varied { seed: req.seed } } else { VariantMode::Canonical };
        let curriculum = Curriculum::new(tasks, FeedbackOracle::new(domain, mode));
        Ok(Entry { session, mode: req.teacher, curriculum, training, seed: req.seed })
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    state.inner.sessions.lock().expect("session table lock").insert(id.clone(), Arc::new(Mutex::new(entry)));
    Ok((StatusCode::CREATED, Json(json!({ "id": id }))))
}

fn state_json(id: &str, e: &Entry) -> Value {
    let s = &e.session;
    let predicates: Vec<Value> = s
        .registry()
        .predicates()
        .map(|p| json!({"name": p.name, "params": p.params, "description": p.description, "source": p.source, "negated": p.negated}))
        .collect();
    let symbolic: Option<Vec<String>> = s.symbolic_state().map(|st| st.0.iter().map(|a| a.to_string()).collect());
    let goal: Option<Vec<String>> = s.goal().map(|g| g.iter().map(|l| l.to_string()).collect());
    json!({
        "id": id,
        "domain": s.domain(),
        "mode": e.mode,
        "status": s.status(),
        "step": s.step(),
        "episode": s.episode(),
        "task": e.curriculum.current_task().map(|t| t.id.clone()),
        "remaining_tasks": e.curriculum.remaining(),
        "world": s.world(),
        "symbolic_state": symbolic,
        "goal_text": s.goal_text(),
        "goal": goal,
        "pending": s.pending(),
        "predicates": predicates,
        "operators": predlearn::pddl::print_domain(s.pddl_domain()),
        "preconditions": s.ledger(),
        "counts": s.counters().as_map(),
    })
}

async fn session_state(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let key = id.clone();
    with_entry(&state, &key, move |e| Ok(Json(state_json(&id, e)))).await
}

async fn post_goal(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<StepOutcome>, ApiError> {
    let req: TextBody = parse_body(&body)?;
    if req.text.trim().is_empty() {
        return Err(ApiError::unprocessable("goal text is empty"));
    }
    with_entry(&state, &id, move |e| {
        if e.mode != TeacherMode::Human {
            return Err(ApiError::conflict("goals come from the oracle in this session"));
        }
        if e.session.status() != SessionStatus::AwaitingGoal {
            return Err(ApiError::conflict(format!("session is {:?}", e.session.status())));
        }
        let task = e.curriculum.take_next().ok_or_else(|| ApiError::conflict("no scenes left"))?.clone();
        let world = task.world().map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
        Ok(Json(e.session.begin_episode(&task.id, world, &req.text)?))
    })
    .await
}

async fn post_feedback(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<StepOutcome>, ApiError> {
    let req: TextBody = parse_body(&body)?;
    with_entry(&state, &id, move |e| {
        if e.session.status() != SessionStatus::AwaitingFeedback {
            return Err(ApiError::conflict(format!(
                "no proposal is awaiting feedback (session is {:?})",
                e.session.status()
            )));
        }
        Ok(Json(e.session.feedback_text(&req.text)?))
    })
    .await
}

async fn advance(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<StepOutcome>, ApiError> {
    with_entry(&state, &id, move |e| {
        if e.session.status() == SessionStatus::AwaitingFeedback {
            return Err(ApiError::conflict("a proposal is awaiting feedback"));
        }
        let outcome = match e.mode {
            TeacherMode::Scripted | TeacherMode::Remote => e.curriculum.advance(&mut e.session)?,
            TeacherMode::Human => match e.session.status() {
                SessionStatus::Finished => StepOutcome::Finished,
                SessionStatus::AwaitingGoal => return Err(ApiError::conflict("post a goal first")),
                _ => match e.session.propose()? {
                    Some(Proposal::Action { action, .. }) => StepOutcome::Proposed { action },
                    Some(Proposal::DeclareSuccess) => StepOutcome::GoalDeclared,
                    None if e.session.status() == SessionStatus::AwaitingGoal => StepOutcome::Stalled,
                    None => StepOutcome::Aborted { reason: "proposal failed".into() },
                },
            },
        };
        Ok(Json(outcome))
    })
    .await
}

async fn session_log(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let text = with_entry(&state, &id, |e| Ok(e.session.log().to_jsonl())).await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

async fn session_bundle(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<BTreeMap<String, String>>, ApiError> {
    with_entry(&state, &id, |e| {
        let manifest = BundleManifest { seed: e.seed, training: e.training.clone(), ..Default::default() };
        Ok(Json(e.session.bundle(manifest).files()))
    })
    .await
}

/// Serves until interrupted.
pub async fn serve(addr: &str, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
