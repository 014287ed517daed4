//! Drives the HTTP API in-process: a dispatcher decision that dooms the
//! junction, then undo.

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use railock::api::{router, ApiConfig, AppState};
use railock::generator::junction;
use railock::serialize_instance;

async fn call(app: &axum::Router, method: &str, uri: &str, body: String) -> Value {
    let req = Request::builder().method(method).uri(uri).body(Body::from(body)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap()
}

#[tokio::main]
async fn main() {
    let app = router(AppState::new(ApiConfig::default()));
    let v = call(&app, "POST", "/sessions", serialize_instance(&junction())).await;
    let id = v["id"].as_str().unwrap().to_string();
    println!("created {id}: {}", v["verdict"]["status"]);
    for (train, route) in [("t1", "r2.e"), ("t2", "r6.w"), ("t2", "r3d.w")] {
        let body = json!({"train": train, "elementary_route": route}).to_string();
        let v = call(&app, "POST", &format!("/sessions/{id}/actions"), body).await;
        println!("{train} -> {route}: {}", v["verdict"]["status"]);
    }
    let v = call(&app, "POST", &format!("/sessions/{id}/undo"), String::new()).await;
    println!("undo: {}", v["verdict"]["status"]);
}
