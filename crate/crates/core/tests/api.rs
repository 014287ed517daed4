//! HTTP tests against the router, without a socket.

use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use railock::api::{router, ApiConfig, AppState};
use railock::generator::{four_station, junction, ladder};
use railock::oracle::{oracle_decide, OracleVerdict, DEFAULT_NODE_BUDGET};
use railock::{parse_instance, serialize_instance, ProblemInstance, SimState};

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

fn app() -> (axum::Router, std::sync::Arc<AppState>) {
    let state = AppState::new(ApiConfig::default());
    (router(state.clone()), state)
}

async fn create(app: &axum::Router, inst: &ProblemInstance) -> Value {
    let (status, v) = call(app, "POST", "/sessions", Some(serialize_instance(inst))).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v
}

async fn act(app: &axum::Router, id: &str, train: &str, route: &str) -> (StatusCode, Value) {
    let body = json!({"train": train, "elementary_route": route}).to_string();
    call(app, "POST", &format!("/sessions/{id}/actions"), Some(body)).await
}

fn status_of(v: &Value) -> &str {
    v["verdict"]["status"].as_str().unwrap()
}

/// Oracle verdict on the state reached by replaying `history` names.
fn oracle_after(inst: &ProblemInstance, history: &[(&str, &str)]) -> OracleVerdict {
    let mut s = SimState::initial(inst);
    for (t, e) in history {
        let t = inst.train_by_name(t).unwrap();
        let e = inst.infrastructure.elementary_by_name(e).unwrap();
        s = s.apply_action(inst, t, e).unwrap();
    }
    let live = railock::api::live_instance(inst, &s).unwrap();
    oracle_decide(&live, DEFAULT_NODE_BUDGET)
}

#[tokio::test]
async fn junction_session_starts_live_with_moves_for_each_train() {
    let (app, _) = app();
    let v = create(&app, &junction()).await;
    assert_eq!(status_of(&v), "live");
    let actions = v["legal_actions"].as_array().unwrap();
    for t in ["t1", "t2"] {
        assert!(actions.iter().any(|a| a["train"] == t), "no action for {t}");
    }
}

#[tokio::test]
async fn legal_actions_match_dynamics() {
    let (app, _) = app();
    let inst = junction();
    let v = create(&app, &inst).await;
    let expected: Vec<Value> = SimState::initial(&inst)
        .legal_actions(&inst)
        .into_iter()
        .map(|(t, e)| {
            json!({
                "train": inst.train(t).name,
                "elementary_route": inst.infrastructure.elementary(e).name,
            })
        })
        .collect();
    assert_eq!(v["legal_actions"].as_array().unwrap(), &expected);
}

#[tokio::test]
async fn bound_for_deadlock_at_creation() {
    let (app, _) = app();
    let v = create(&app, &four_station()).await;
    assert_eq!(status_of(&v), "dead");
}

#[tokio::test]
async fn malformed_body_is_400() {
    let (app, _) = app();
    let (status, _) = call(&app, "POST", "/sessions", Some("{not json".into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "POST", "/sessions", Some(r#"{"trains": 3}"#.into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unknown_session_is_404() {
    let (app, _) = app();
    let (status, _) = call(&app, "GET", "/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = act(&app, "nope", "t1", "r2.e").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn illegal_actions_are_409() {
    let (app, _) = app();
    let v = create(&app, &junction()).await;
    let id = v["id"].as_str().unwrap();
    // Not adjacent to t1.
    assert_eq!(act(&app, id, "t1", "r4.e").await.0, StatusCode::CONFLICT);
    assert_eq!(act(&app, id, "t9", "r2.e").await.0, StatusCode::CONFLICT);
    assert_eq!(act(&app, id, "t1", "nowhere").await.0, StatusCode::CONFLICT);
    // Conflicting allocation: r2.w is the opposing copy of t1's r2.e.
    assert_eq!(act(&app, id, "t1", "r2.e").await.0, StatusCode::OK);
    assert_eq!(act(&app, id, "t2", "r6.w").await.0, StatusCode::OK);
    assert_eq!(act(&app, id, "t2", "r3d.w").await.0, StatusCode::OK);
    assert_eq!(act(&app, id, "t2", "r2.w").await.0, StatusCode::CONFLICT);
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/actions"), Some("[]".into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn crucial_move_flips_verdict_and_undo_restores_it() {
    let (app, _) = app();
    let inst = junction();
    let v = create(&app, &inst).await;
    let id = v["id"].as_str().unwrap().to_string();

    let (_, v) = act(&app, &id, "t1", "r2.e").await;
    assert_eq!(status_of(&v), "live");
    assert_eq!(oracle_after(&inst, &[("t1", "r2.e")]), OracleVerdict::Live);
    let (_, v) = act(&app, &id, "t2", "r6.w").await;
    assert_eq!(status_of(&v), "live");

    let started = Instant::now();
    let (_, v) = act(&app, &id, "t2", "r3d.w").await;
    assert!(started.elapsed() < Duration::from_secs(10));
    assert_eq!(status_of(&v), "dead");
    assert_eq!(
        oracle_after(&inst, &[("t1", "r2.e"), ("t2", "r6.w"), ("t2", "r3d.w")]),
        OracleVerdict::Dead
    );

    let (status, v) = call(&app, "POST", &format!("/sessions/{id}/undo"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(status_of(&v), "live");
}

#[tokio::test]
async fn benign_move_on_long_ladder_stays_live() {
    let (app, _) = app();
    let inst = ladder(2, 1.8, 2.0).unwrap();
    let v = create(&app, &inst).await;
    assert_eq!(status_of(&v), "live");
    let id = v["id"].as_str().unwrap();
    let first = v["legal_actions"][0].clone();
    let (t, e) = (first["train"].as_str().unwrap(), first["elementary_route"].as_str().unwrap());
    let (status, v) = act(&app, id, t, e).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(status_of(&v), "live");
    assert_eq!(oracle_after(&inst, &[(t, e)]), OracleVerdict::Live);
}

#[tokio::test]
async fn apply_then_undo_is_identity() {
    let (app, _) = app();
    let v0 = create(&app, &junction()).await;
    let id = v0["id"].as_str().unwrap();
    act(&app, id, "t1", "r2.e").await;
    let (_, v1) = call(&app, "POST", &format!("/sessions/{id}/undo"), None).await;
    assert_eq!(
        serde_json::to_string(&v1["state"]).unwrap(),
        serde_json::to_string(&v0["state"]).unwrap()
    );
    assert_eq!(v1["legal_actions"], v0["legal_actions"]);
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/undo"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn triple_apply_and_undo_returns_to_start() {
    let (app, _) = app();
    let v0 = create(&app, &junction()).await;
    let id = v0["id"].as_str().unwrap();
    for (t, e) in [("t1", "r2.e"), ("t2", "r6.w"), ("t1", "r3.e")] {
        assert_eq!(act(&app, id, t, e).await.0, StatusCode::OK);
    }
    for _ in 0..3 {
        call(&app, "POST", &format!("/sessions/{id}/undo"), None).await;
    }
    let (_, v) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(v["state"], v0["state"]);
    assert_eq!(v["verdict"]["status"], v0["verdict"]["status"]);
    assert_eq!(v["history"].as_array().unwrap().len(), 0);
}

#[tokio::test]
async fn history_has_one_entry_per_action() {
    let (app, _) = app();
    let v = create(&app, &junction()).await;
    let id = v["id"].as_str().unwrap();
    act(&app, id, "t1", "r2.e").await;
    act(&app, id, "t2", "r6.w").await;
    let (status, v) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["history"].as_array().unwrap().len(), 2);
    assert_eq!(v["history"][1]["train"], "t2");
}

#[tokio::test]
async fn verdict_is_deterministic_per_state() {
    let (app, _) = app();
    let a = create(&app, &junction()).await;
    let b = create(&app, &junction()).await;
    assert_ne!(a["id"], b["id"]);
    for key in ["status", "steps", "algorithm"] {
        assert_eq!(a["verdict"][key], b["verdict"][key]);
    }
}

#[tokio::test]
async fn detect_endpoint_returns_plan() {
    let (app, _) = app();
    let inst = junction();
    let body = json!({"instance": serde_json::from_str::<Value>(&serialize_instance(&inst)).unwrap(), "algorithm": 2});
    let (status, v) = call(&app, "POST", "/detect", Some(body.to_string())).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["verdict"]["status"], "live");
    assert_eq!(v["verdict"]["algorithm"], 2);
    assert!(!v["plan"]["steps"].as_array().unwrap().is_empty());

    let body = json!({"instance": {}, "algorithm": 2});
    let (status, _) = call(&app, "POST", "/detect", Some(body.to_string())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn idle_sessions_expire() {
    let (app, state) = app();
    create(&app, &junction()).await;
    assert_eq!(state.session_count(), 1);
    assert_eq!(state.expire_idle(Instant::now()).await, 0);
    let later = Instant::now() + ApiConfig::default().idle_ttl + Duration::from_secs(1);
    assert_eq!(state.expire_idle(later).await, 1);
    assert_eq!(state.session_count(), 0);
}

#[tokio::test]
async fn served_instance_round_trips() {
    let inst = junction();
    assert_eq!(parse_instance(&serialize_instance(&inst)).unwrap(), inst);
}
