//! Starts the HTTP service on an ephemeral port and drives it as a client would.
//!
//! `cargo run --example serve`

use std::time::Duration;

use cowrite::service::{self, ServiceConfig};
use serde_json::{json, Value};

fn call(method: &str, url: &str, body: Option<Value>) -> Value {
    let response = match body {
        Some(body) => ureq::post(url).send_json(body),
        None if method == "GET" => ureq::get(url).call(),
        None => unreachable!("only GET requests lack a body"),
    };
    response
        .expect("request succeeds")
        .body_mut()
        .read_json()
        .expect("json response")
}

fn main() -> cowrite::Result<()> {
    let runtime = tokio::runtime::Runtime::new()?;
    let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let base = format!("http://{}", listener.local_addr()?);
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = runtime.spawn(service::run(listener, ServiceConfig::default(), async {
        let _ = stopped.await;
    }));

    let health = loop {
        match ureq::get(&format!("{base}/healthz")).call() {
            Ok(mut r) => break r.body_mut().read_json::<Value>().expect("health json"),
            Err(_) => std::thread::sleep(Duration::from_millis(20)),
        }
    };
    println!("GET /healthz -> {health}");

    let created = call(
        "POST",
        &format!("{base}/api/v1/session"),
        Some(json!({"messages": [{"role": "user", "content": "edit"}], "k": 2})),
    );
    let id = created["session_id"].as_str().expect("session id").to_string();
    println!(
        "session {id}: suggestions {}",
        created["suggestions"].as_array().map_or(0, Vec::len)
    );

    let action = format!("{base}/api/v1/session/{id}/action");
    let after = call(
        "POST",
        &action,
        Some(json!({"op": "accept", "rank": 0, "revision": created["revision"]})),
    );
    println!("accepted #0 -> {:?}", after["composed_text"]);
    let done = call("POST", &action, Some(json!({"op": "finalize"})));
    println!(
        "finalized -> message {} metrics ratio {}",
        done["message"], done["metrics"]["ratio"]
    );

    let log = call("GET", &format!("{base}/api/v1/session/{id}/log"), None);
    println!("log has {} events", log["events"].as_array().map_or(0, Vec::len));

    let report = call(
        "POST",
        &format!("{base}/api/v1/highlight"),
        Some(json!({"prompt": "edit", "document": "the dog sat ."})),
    );
    for span in report["spans"].as_array().into_iter().flatten() {
        println!(
            "  {:<4} highlighted={} alternative={}",
            span["original_token_text"].as_str().unwrap_or(""),
            span["highlighted"],
            span["alternative_text"]
        );
    }

    let _ = stop.send(());
    runtime.block_on(server).expect("server task")?;
    Ok(())
}
