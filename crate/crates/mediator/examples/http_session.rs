//! A full session through the HTTP routes, without opening a socket.
//!
//! Two agents are simulated by the mediator; the other two are played here
//! by answering each pending query truthfully.

use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use envyfree::harness::{gen_profile, TrialConfig};
use envyfree::query::Query;
use envyfree::session::truthful_answer;
use envyfree_mediator::api::router;
use envyfree_mediator::store::SessionStore;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> Value {
    let body = body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty);
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json").body(body).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap()
}

#[tokio::main]
async fn main() {
    let app = router(Arc::new(SessionStore::in_memory()));
    let specs = gen_profile(&TrialConfig::default(), 42);
    let agents = json!([
        { "kind": "external" },
        { "kind": "simulated", "valuation": specs[1] },
        { "kind": "external" },
        { "kind": "simulated", "valuation": specs[3] },
    ]);
    let created = call(&app, "POST", "/sessions", Some(json!({ "agents": agents }))).await;
    let id = created["id"].as_str().unwrap().to_string();
    let tokens: Vec<String> =
        created["tokens"].as_array().unwrap().iter().map(|t| t["token"].as_str().unwrap().to_string()).collect();
    println!("session {id}");

    let mut answered = 0;
    'session: loop {
        for k in [0, 2] {
            let view = call(&app, "GET", &format!("/sessions/{id}/pending?token={}", tokens[k]), None).await;
            match view["status"].as_str().unwrap() {
                "your_turn" => {
                    let q: Query = serde_json::from_value(view["query"].clone()).unwrap();
                    let a = truthful_answer(&specs[k], &q).unwrap();
                    let body = json!({ "token": tokens[k], "seq": q.seq, "answer": a.to_string() });
                    call(&app, "POST", &format!("/sessions/{id}/answer"), Some(body)).await;
                    answered += 1;
                    continue 'session;
                }
                "waiting" => {}
                _ => break 'session,
            }
        }
    }

    let state = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    println!("{answered} answers over HTTP");
    println!("counters {}", state["counters"]);
    println!("allocation {}", serde_json::to_string_pretty(&state["progress"]["allocation"]).unwrap());
}
