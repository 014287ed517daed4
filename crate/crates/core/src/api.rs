//! HTTP sandbox: load an instance, allocate routes step by step and watch
//! the verdict.
//!
//! Routes:
//! - `POST /sessions` with an instance document
//! - `GET /sessions/{id}`
//! - `POST /sessions/{id}/actions` with `{"train": .., "elementary_route": ..}`
//! - `POST /sessions/{id}/undo`
//! - `POST /detect` with `{"instance": .., "algorithm": 3, "timeout_s": 10}`

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use tower_http::cors::CorsLayer;

use crate::detector::{detect, Algorithm, DetectOptions, PlanDoc, Status, Verdict, VerdictDoc};
use crate::dynamics::{SimState, StateDoc};
use crate::model::{
    parse_instance, ElemIdx, InstanceDoc, ProblemInstance, TrainDoc, TrainIdx,
};
use crate::sat::BackendKind;

#[derive(Clone, Debug)]
pub struct ApiConfig {
    pub detect_timeout: Duration,
    pub idle_ttl: Duration,
    pub backend: BackendKind,
}

impl Default for ApiConfig {
    fn default() -> Self {
        ApiConfig {
            detect_timeout: Duration::from_secs(10),
            idle_ttl: Duration::from_secs(30 * 60),
            backend: BackendKind::from_env(),
        }
    }
}

struct Session {
    instance: Arc<ProblemInstance>,
    /// `states[0]` is the initial state; one more per applied action.
    states: Vec<SimState>,
    history: Vec<(TrainIdx, ElemIdx)>,
    verdicts: Vec<VerdictDoc>,
    last_used: Instant,
}

pub struct AppState {
    config: ApiConfig,
    sessions: std::sync::Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(config: ApiConfig) -> Arc<Self> {
        Arc::new(AppState {
            config,
            sessions: std::sync::Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        })
    }

    fn get(&self, id: &str) -> Option<Arc<Mutex<Session>>> {
        self.sessions.lock().unwrap().get(id).cloned()
    }

    /// Drops sessions idle for longer than the configured time to live.
    pub async fn expire_idle(&self, now: Instant) -> usize {
        let all: Vec<(String, Arc<Mutex<Session>>)> = self
            .sessions
            .lock()
            .unwrap()
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let mut stale = Vec::new();
        for (id, s) in all {
            if now.saturating_duration_since(s.lock().await.last_used) > self.config.idle_ttl {
                stale.push(id);
            }
        }
        let mut map = self.sessions.lock().unwrap();
        for id in &stale {
            map.remove(id);
        }
        stale.len()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionDoc {
    pub train: String,
    pub elementary_route: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub state: StateDoc,
    pub legal_actions: Vec<ActionDoc>,
    pub verdict: VerdictDoc,
    pub history: Vec<ActionDoc>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct DetectRequest {
    pub instance: InstanceDoc,
    #[serde(default)]
    pub algorithm: Option<Algorithm>,
    #[serde(default)]
    pub timeout_s: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DetectResponse {
    pub verdict: VerdictDoc,
    pub plan: Option<PlanDoc>,
}

#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

fn not_found(id: &str) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, format!("unknown session '{id}'"))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/:id", get(get_session))
        .route("/sessions/:id/actions", post(apply_action))
        .route("/sessions/:id/undo", post(undo))
        .route("/detect", post(detect_once))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serves until the process is stopped, expiring idle sessions once a minute.
pub async fn serve(addr: SocketAddr, config: ApiConfig) -> std::io::Result<()> {
    let state = AppState::new(config);
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            let n = sweeper.expire_idle(Instant::now()).await;
            if n > 0 {
                log::info!("expired {n} idle session(s)");
            }
        }
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

/// The live state as a fresh instance: current chains become initial
/// positions. `None` when a train left the model without finishing.
pub fn live_instance(inst: &ProblemInstance, state: &SimState) -> Option<ProblemInstance> {
    let infra = &inst.infrastructure;
    let name = |r: &crate::model::RouteIdx| infra.route(*r).name.clone();
    let mut doc = inst.to_doc();
    doc.trains.clear();
    for t in inst.train_indices() {
        let spec = inst.train(t);
        if !state.is_present(t) {
            if state.is_finished(t) {
                continue;
            }
            return None;
        }
        let chain = state.chain(inst, t);
        let final_routes = if state.is_finished(t) {
            chain.iter().map(name).collect()
        } else {
            spec.final_routes.iter().map(name).collect()
        };
        doc.trains.push(TrainDoc {
            id: spec.name.clone(),
            length: spec.length,
            initial: chain.iter().map(name).collect(),
            final_routes,
        });
    }
    Some(ProblemInstance::from_doc(&doc).expect("a reachable state is a valid instance"))
}

fn verdict_for(inst: &ProblemInstance, state: &SimState, config: &ApiConfig) -> VerdictDoc {
    let start = Instant::now();
    let Some(live) = live_instance(inst, state) else {
        return VerdictDoc {
            status: Status::Dead,
            steps: 0,
            time_s: start.elapsed().as_secs_f64(),
            algorithm: Algorithm::MaximalProgress,
        };
    };
    let opts = DetectOptions {
        algorithm: Algorithm::MaximalProgress,
        timeout: Some(config.detect_timeout),
        step_cap: None,
        backend: config.backend,
    };
    match detect(&live, &opts) {
        Ok(v) => v.to_doc(),
        Err(e) => {
            log::error!("detection failed: {e}");
            VerdictDoc {
                status: Status::Unknown,
                steps: 0,
                time_s: start.elapsed().as_secs_f64(),
                algorithm: Algorithm::MaximalProgress,
            }
        }
    }
}

async fn verdict_blocking(
    inst: Arc<ProblemInstance>,
    state: SimState,
    config: ApiConfig,
) -> VerdictDoc {
    tokio::task::spawn_blocking(move || verdict_for(&inst, &state, &config))
        .await
        .expect("detection task")
}

fn action_doc(inst: &ProblemInstance, (t, e): (TrainIdx, ElemIdx)) -> ActionDoc {
    ActionDoc {
        train: inst.train(t).name.clone(),
        elementary_route: inst.infrastructure.elementary(e).name.clone(),
    }
}

fn view(id: &str, s: &Session) -> SessionView {
    let inst = &s.instance;
    let state = s.states.last().unwrap();
    SessionView {
        id: id.to_string(),
        state: state.to_doc(inst),
        legal_actions: state
            .legal_actions(inst)
            .into_iter()
            .map(|a| action_doc(inst, a))
            .collect(),
        verdict: s.verdicts.last().unwrap().clone(),
        history: s.history.iter().map(|a| action_doc(inst, *a)).collect(),
    }
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    body: String,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let inst = parse_instance(&body).map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
    let inst = Arc::new(inst);
    let initial = SimState::initial(&inst);
    let verdict = verdict_blocking(inst.clone(), initial.clone(), app.config.clone()).await;
    let id = format!("s{}", app.next_id.fetch_add(1, Ordering::Relaxed));
    let session = Session {
        instance: inst,
        states: vec![initial],
        history: Vec::new(),
        verdicts: vec![verdict],
        last_used: Instant::now(),
    };
    let v = view(&id, &session);
    app.sessions
        .lock()
        .unwrap()
        .insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(v)))
}

async fn get_session(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    let s = app.get(&id).ok_or_else(|| not_found(&id))?;
    let mut s = s.lock().await;
    s.last_used = Instant::now();
    Ok(Json(view(&id, &s)))
}

async fn apply_action(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: String,
) -> Result<Json<SessionView>, ApiError> {
    let s = app.get(&id).ok_or_else(|| not_found(&id))?;
    let action: ActionDoc = serde_json::from_str(&body)
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
    let mut s = s.lock().await;
    s.last_used = Instant::now();
    let inst = s.instance.clone();
    let conflict = |msg: String| ApiError(StatusCode::CONFLICT, msg);
    let t = inst
        .train_by_name(&action.train)
        .ok_or_else(|| conflict(format!("unknown train '{}'", action.train)))?;
    let e = inst
        .infrastructure
        .elementary_by_name(&action.elementary_route)
        .ok_or_else(|| conflict(format!("unknown route '{}'", action.elementary_route)))?;
    let next = s
        .states
        .last()
        .unwrap()
        .apply_action(&inst, t, e)
        .map_err(|e| conflict(e.to_string()))?;
    let verdict = verdict_blocking(inst, next.clone(), app.config.clone()).await;
    s.states.push(next);
    s.history.push((t, e));
    s.verdicts.push(verdict);
    Ok(Json(view(&id, &s)))
}

async fn undo(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    let s = app.get(&id).ok_or_else(|| not_found(&id))?;
    let mut s = s.lock().await;
    s.last_used = Instant::now();
    if s.history.is_empty() {
        return Err(ApiError(StatusCode::CONFLICT, "nothing to undo".into()));
    }
    s.history.pop();
    s.states.pop();
    s.verdicts.pop();
    Ok(Json(view(&id, &s)))
}

async fn detect_once(
    State(app): State<Arc<AppState>>,
    body: String,
) -> Result<Json<DetectResponse>, ApiError> {
    let req: DetectRequest = serde_json::from_str(&body)
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
    let inst = ProblemInstance::from_doc(&req.instance)
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
    let timeout = match req.timeout_s {
        Some(s) if s.is_finite() && s >= 0.0 => Duration::from_secs_f64(s),
        Some(_) => return Err(ApiError(StatusCode::BAD_REQUEST, "invalid timeout_s".into())),
        None => app.config.detect_timeout,
    };
    let opts = DetectOptions {
        algorithm: req.algorithm.unwrap_or(Algorithm::MaximalProgress),
        timeout: Some(timeout),
        step_cap: None,
        backend: app.config.backend,
    };
    let result = tokio::task::spawn_blocking(move || {
        detect(&inst, &opts).map(|v: Verdict| DetectResponse {
            verdict: v.to_doc(),
            plan: v.plan.map(|p| p.to_doc(&inst)),
        })
    })
    .await
    .expect("detection task");
    result
        .map(Json)
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
}
