//! HTTP/JSON API over classification sessions.
//!
//! The server owns all session state. Each session sits behind its own mutex, so
//! requests against different sessions run concurrently and mutations of one
//! session apply in some sequential order.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use anyhow::Context;
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use helm_core::net::Evidence;
use helm_core::session::{
    CompiledModel, EngineKind, JournalEntry, Session, SessionError, SessionStatus, Source,
    DEFAULT_STOP_THRESHOLD,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.to_string(),
            message: message.into(),
        }
    }

    fn not_found(what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not-found", format!("no such {what}"))
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let code = e.code();
        let status = match code {
            "unknown-node" | "unknown-state" | "invalid-evidence" | "inconsistent-evidence"
            | "not-askable" | "already-answered" | "invalid-model" | "invalid-journal" => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            "session-stopped" | "stale-read" => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

struct Slot {
    session: Session,
    threshold: f64,
}

pub struct AppState {
    models: BTreeMap<String, Arc<CompiledModel>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Slot>>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(models: impl IntoIterator<Item = Arc<CompiledModel>>) -> Self {
        Self {
            models: models.into_iter().map(|m| (m.name.clone(), m)).collect(),
            sessions: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        }
    }

    /// Every `*.json` feature model directly inside `dir`. Files that fail to
    /// compile are reported to `err` and skipped.
    pub fn load(dir: &Path, err: &mut dyn Write) -> anyhow::Result<Self> {
        let mut models = Vec::new();
        let entries = std::fs::read_dir(dir).with_context(|| format!("models directory {}", dir.display()))?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            match crate::load_model(&path) {
                Ok(m) => models.push(m),
                Err(e) => writeln!(err, "skipping {}: {e:#}", path.display())?,
            }
        }
        Ok(Self::new(models))
    }

    pub fn model_names(&self) -> Vec<String> {
        self.models.keys().cloned().collect()
    }

    fn slot(&self, id: &str) -> ApiResult<Arc<Mutex<Slot>>> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session"))
    }

    /// Writes one `<id>.json` per session holding its model, engine and journal.
    pub fn persist(&self, dir: &Path) -> anyhow::Result<usize> {
        let sessions = self.sessions.read().unwrap();
        if sessions.is_empty() {
            return Ok(0);
        }
        std::fs::create_dir_all(dir)?;
        for (id, slot) in sessions.iter() {
            let slot = slot.lock().unwrap();
            let s = &slot.session;
            let doc = json!({
                "id": id,
                "model": s.model().name,
                "engine": s.kind(),
                "status": s.status(),
                "journal": s.journal(),
            });
            let path = dir.join(format!("{id}.json"));
            std::fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")
                .with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(sessions.len())
    }
}

#[derive(Debug, Serialize)]
pub struct RankEntry {
    pub class: String,
    pub probability: f64,
}

#[derive(Debug, Serialize)]
pub struct SessionView {
    pub id: String,
    pub model: String,
    pub engine: EngineKind,
    pub threshold: f64,
    pub status: SessionStatus,
    pub ranking: Vec<RankEntry>,
    pub journal: Vec<JournalEntry>,
}

fn ranking(session: &Session) -> ApiResult<Vec<RankEntry>> {
    Ok(session
        .ranking()?
        .into_iter()
        .map(|(class, probability)| RankEntry { class, probability })
        .collect())
}

fn view(slot: &Slot) -> ApiResult<SessionView> {
    let s = &slot.session;
    Ok(SessionView {
        id: s.id().to_string(),
        model: s.model().name.clone(),
        engine: s.kind(),
        threshold: slot.threshold,
        status: s.status(),
        ranking: ranking(s)?,
        journal: s.journal().to_vec(),
    })
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid-json", e.to_string()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    model: String,
    #[serde(default = "default_engine")]
    engine: EngineKind,
    threshold: Option<f64>,
}

fn default_engine() -> EngineKind {
    EngineKind::Bms
}

#[derive(Deserialize)]
struct EvidenceRequest {
    #[serde(flatten)]
    evidence: Evidence,
    source: Option<Source>,
}

async fn create_session(State(app): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let req: CreateRequest = parse_body(&body)?;
    let model = app.models.get(&req.model).ok_or_else(|| ApiError::not_found("model"))?;
    let threshold = req.threshold.unwrap_or(DEFAULT_STOP_THRESHOLD);
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid-threshold",
            "threshold must lie in (0, 1]",
        ));
    }
    let id = format!("s{}", app.next_id.fetch_add(1, Ordering::Relaxed));
    let slot = Slot {
        session: Session::start(&id, Arc::clone(model), req.engine),
        threshold,
    };
    let v = view(&slot)?;
    app.sessions.write().unwrap().insert(id, Arc::new(Mutex::new(slot)));
    Ok((StatusCode::CREATED, Json(v)))
}

async fn get_session(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<SessionView>> {
    let slot = app.slot(&id)?;
    let slot = slot.lock().unwrap();
    Ok(Json(view(&slot)?))
}

async fn post_evidence(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<SessionView>> {
    let slot = app.slot(&id)?;
    let req: EvidenceRequest = parse_body(&body)?;
    let mut slot = slot.lock().unwrap();
    let Slot { session, threshold } = &mut *slot;
    match req.source.unwrap_or(Source::Volunteered) {
        Source::Asked => session.answer(&req.evidence.node, req.evidence.form)?,
        Source::Volunteered => session.volunteer(req.evidence)?,
    }
    session.stop_check(*threshold)?;
    Ok(Json(view(&slot)?))
}

async fn get_question(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let slot = app.slot(&id)?;
    let slot = slot.lock().unwrap();
    Ok(Json(match slot.session.ask()? {
        Some(q) => serde_json::to_value(q).expect("question serializes"),
        None => json!({ "question": null }),
    }))
}

async fn get_ranking(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let slot = app.slot(&id)?;
    let slot = slot.lock().unwrap();
    Ok(Json(json!({ "ranking": ranking(&slot.session)? })))
}

async fn get_beliefs(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let slot = app.slot(&id)?;
    let slot = slot.lock().unwrap();
    Ok(Json(json!({ "beliefs": slot.session.beliefs()? })))
}

async fn get_merits(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let slot = app.slot(&id)?;
    let slot = slot.lock().unwrap();
    Ok(Json(json!({ "merits": slot.session.merits()? })))
}

async fn stop_session(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<SessionView>> {
    let slot = app.slot(&id)?;
    let mut slot = slot.lock().unwrap();
    slot.session.stop();
    Ok(Json(view(&slot)?))
}

async fn list_models(State(app): State<Arc<AppState>>) -> Json<Value> {
    let models: Vec<Value> = app
        .models
        .values()
        .map(|m| {
            json!({
                "name": m.name,
                "classes": m.model.class_ids(),
                "observations": m.observations.iter().map(|o| json!({
                    "id": o.id,
                    "label": o.label,
                    "cost": o.cost,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    Json(json!({ "models": models }))
}

async fn fallback() -> ApiError {
    ApiError::not_found("route")
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/models", get(list_models))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/evidence", post(post_evidence))
        .route("/sessions/{id}/question", get(get_question))
        .route("/sessions/{id}/ranking", get(get_ranking))
        .route("/sessions/{id}/beliefs", get(get_beliefs))
        .route("/sessions/{id}/merits", get(get_merits))
        .route("/sessions/{id}/stop", post(stop_session))
        .fallback(fallback)
        .with_state(state)
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub port: u16,
    pub models_dir: PathBuf,
    pub journal_dir: PathBuf,
}

/// Serves until interrupted, then writes every session's journal.
pub async fn serve(config: ServeConfig, err: &mut dyn Write) -> anyhow::Result<()> {
    let state = Arc::new(AppState::load(&config.models_dir, err)?);
    writeln!(err, "models: {}", state.model_names().join(", "))?;
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", config.port))
        .await
        .with_context(|| format!("binding port {}", config.port))?;
    writeln!(err, "listening on {}", listener.local_addr()?)?;
    axum::serve(listener, router(Arc::clone(&state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    let n = state.persist(&config.journal_dir)?;
    writeln!(err, "saved {n} session journal(s) to {}", config.journal_dir.display())?;
    Ok(())
}
