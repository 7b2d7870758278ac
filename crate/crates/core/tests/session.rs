use std::net::TcpStream;
use std::time::{Duration, Instant};

use iac_core::harness::{serve_session, ControllerKind, ScenarioConfig, ScenarioId};
use serde_json::Value;
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{connect, Message, WebSocket};

type Client = WebSocket<MaybeTlsStream<TcpStream>>;

fn client(port: u16) -> Client {
    let (ws, _) = connect(format!("ws://127.0.0.1:{port}")).expect("connect");
    if let MaybeTlsStream::Plain(s) = ws.get_ref() {
        s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    }
    ws
}

fn next(ws: &mut Client) -> Value {
    loop {
        if let Message::Text(t) = ws.read().expect("read") {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

/// Read until a message satisfies `pred` or the deadline passes.
fn wait_for(ws: &mut Client, secs: f64, pred: impl Fn(&Value) -> bool) -> Option<Value> {
    let end = Instant::now() + Duration::from_secs_f64(secs);
    while Instant::now() < end {
        let m = next(ws);
        if pred(&m) {
            return Some(m);
        }
    }
    None
}

fn send(ws: &mut Client, v: Value) {
    ws.send(Message::text(v.to_string())).unwrap();
}

fn server() -> iac_core::harness::ServerHandle {
    let cfg = ScenarioConfig::preset(ScenarioId::Balloon, ControllerKind::Iac);
    serve_session(cfg, 0).unwrap()
}

#[test]
fn streams_snapshots_and_applies_inputs() {
    let srv = server();
    let mut ws = client(srv.local_addr().port());

    let first = next(&mut ws);
    assert_eq!(first["type"], "snapshot");
    assert_eq!(first["v"], 1);
    for key in ["tick", "t", "x_l", "x", "tau", "l1", "f_env", "error", "controller", "scenario", "paused"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
    let base_l1 = first["l1"][0].as_f64().unwrap();

    send(&mut ws, serde_json::json!({"type": "grasp_level", "grasp": 20.0}));
    let raised = wait_for(&mut ws, 5.0, |m| m["l1"][0].as_f64().unwrap_or(0.0) > base_l1 + 100.0);
    assert!(raised.is_some(), "grasp did not raise l1");

    send(&mut ws, serde_json::json!({"type": "controller_toggle"}));
    assert!(wait_for(&mut ws, 5.0, |m| m["controller"] == "tic").is_some());

    send(&mut ws, serde_json::json!({"type": "pause"}));
    let paused = wait_for(&mut ws, 5.0, |m| m["paused"] == true).expect("pause");
    send(&mut ws, serde_json::json!({"type": "reset"}));
    let fresh = wait_for(&mut ws, 5.0, |m| m["tick"].as_u64().unwrap() < paused["tick"].as_u64().unwrap()).expect("reset");
    assert_eq!(fresh["tick"], 0);
    srv.shutdown();
}

#[test]
fn malformed_input_reports_and_continues() {
    let srv = server();
    let mut ws = client(srv.local_addr().port());
    ws.send(Message::text("{not json")).unwrap();
    send(&mut ws, serde_json::json!({"type": "grasp_level", "grasp": -1.0}));
    let err = wait_for(&mut ws, 5.0, |m| m["type"] == "error").expect("error message");
    assert!(err["message"].as_str().unwrap().len() > 3);
    let t0 = wait_for(&mut ws, 5.0, |m| m["type"] == "snapshot").unwrap()["tick"].as_u64().unwrap();
    let t1 = wait_for(&mut ws, 5.0, |m| m["type"] == "snapshot" && m["tick"].as_u64().unwrap() > t0);
    assert!(t1.is_some(), "ticks stalled after bad input");
    srv.shutdown();
}

#[test]
fn input_flood_does_not_stall_ticks() {
    let srv = server();
    let mut ws = client(srv.local_addr().port());
    let t0 = next(&mut ws)["tick"].as_u64().unwrap();
    for k in 0..1000 {
        let z = 0.2 + 0.05 * (k as f64 * 0.01).sin();
        send(&mut ws, serde_json::json!({"type": "leader_target_move", "z": z}));
    }
    let later = wait_for(&mut ws, 5.0, |m| m["type"] == "snapshot" && m["tick"].as_u64().unwrap() > t0 + 200);
    assert!(later.is_some());
    srv.shutdown();
}
