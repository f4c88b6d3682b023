use std::net::{SocketAddr, TcpStream};
use std::path::Path;
use std::thread::JoinHandle;

use neurohaptic::analysis::Outcome;
use neurohaptic::bandit::ActionId;
use neurohaptic::engine::config::{ExperimentConfig, preset};
use neurohaptic::engine::live::{LiveReport, LiveServer};
use neurohaptic::engine::log::{Block, block_records, read_log};
use neurohaptic::engine::session::{DeterministicOracle, run_adaptive_block, stream, stream_rng};
use neurohaptic::error::Result;
use serde_json::{Value, json};
use tempfile::tempdir;
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

type Client = WebSocket<MaybeTlsStream<TcpStream>>;

fn config(seed: u64, warmup: usize, timeout_ms: u64) -> ExperimentConfig {
    let mut cfg = preset("paper-calibrated").unwrap();
    cfg.seed = seed;
    cfg.live.training_per_condition = warmup;
    cfg.live.rating_timeout_ms = timeout_ms;
    cfg
}

fn start(cfg: ExperimentConfig, log: &Path, report: &Path) -> (SocketAddr, JoinHandle<Result<LiveReport>>) {
    let server = LiveServer::bind("127.0.0.1:0", cfg, log, Some(report)).unwrap();
    let addr = server.local_addr().unwrap();
    (addr, std::thread::spawn(move || server.serve()))
}

fn connect(addr: SocketAddr) -> Client {
    tungstenite::connect(format!("ws://{addr}")).unwrap().0
}

fn send(ws: &mut Client, v: Value) {
    ws.send(Message::text(v.to_string())).unwrap();
}

fn recv(ws: &mut Client) -> Value {
    loop {
        match ws.read().unwrap() {
            Message::Text(t) => return serde_json::from_str(t.as_str()).unwrap(),
            Message::Close(_) => panic!("server closed"),
            _ => {}
        }
    }
}

/// Rates the presented condition with `ratings`, stopping after `limit`
/// telemetry messages (or at session end). Returns the number rated.
fn drive(ws: &mut Client, ratings: [f64; 4], limit: usize) -> usize {
    send(ws, json!({"type": "ready"}));
    let mut rated = 0;
    while rated < limit {
        let m = recv(ws);
        match m["type"].as_str().unwrap() {
            "trial_start" => {
                let a: ActionId = serde_json::from_value(m["condition"].clone()).unwrap();
                send(ws, json!({"type": "rating", "value": ratings[a.index()]}));
            }
            "telemetry" => rated += 1,
            "session_end" => break,
            "converged" => {}
            other => panic!("unexpected {other}: {m}"),
        }
    }
    rated
}

#[test]
fn interrupted_session_resumes_and_matches_offline_run() {
    let dir = tempdir().unwrap();
    let log = dir.path().join("session.jsonl");
    let report = dir.path().join("session.json");
    let cfg = config(12, 2, 60_000);
    let ratings = [0.0, 0.0, 1.0, 0.0];
    let (addr, server) = start(cfg.clone(), &log, &report);

    let mut ws = connect(addr);
    assert_eq!(drive(&mut ws, ratings, 10), 10);
    drop(ws);
    std::thread::sleep(std::time::Duration::from_millis(100));
    let partial = read_log(&log).unwrap();
    assert_eq!(partial.len(), 10);
    assert_eq!(block_records(&partial, Block::Training).len(), 8);

    let mut ws = connect(addr);
    drive(&mut ws, ratings, usize::MAX);
    let live = server.join().unwrap().unwrap();

    let records = read_log(&log).unwrap();
    let adaptive = block_records(&records, Block::Explicit);
    let offline = run_adaptive_block(
        &cfg.agent,
        Block::Explicit,
        &mut DeterministicOracle(ratings),
        &mut stream_rng(cfg.seed, stream::EXPLICIT_AGENT),
        0,
    )
    .unwrap();
    assert_eq!(adaptive.len(), offline.len());
    for (a, b) in adaptive.iter().zip(&offline) {
        assert_eq!((a.condition, a.reward, a.q_snapshot, a.converged), (b.condition, b.reward, b.q_snapshot, b.converged));
    }
    assert_eq!(live.trials, offline.len());
    assert_eq!(live.training_trials, 8);
    assert_eq!(live.truth, Some(ActionId::ALL[2]));
    assert_eq!(live.converged, offline.last().unwrap().converged);
    assert_eq!(live.outcome, Some(Outcome::classify(live.converged, ActionId::ALL[2])));
    let saved: LiveReport = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(saved, live);
}

#[test]
fn second_connection_is_busy() {
    let dir = tempdir().unwrap();
    let (addr, _server) = start(config(1, 0, 60_000), &dir.path().join("s.jsonl"), &dir.path().join("s.json"));
    let mut first = connect(addr);
    send(&mut first, json!({"type": "ready"}));
    assert_eq!(recv(&mut first)["type"], "trial_start");
    let mut second = connect(addr);
    let m = recv(&mut second);
    assert_eq!((m["type"].as_str(), m["code"].as_str()), (Some("error"), Some("busy")));
    send(&mut first, json!({"type": "rating", "value": 0.5}));
    assert_eq!(recv(&mut first)["type"], "telemetry");
}

#[test]
fn protocol_errors_are_reported() {
    let dir = tempdir().unwrap();
    let log = dir.path().join("s.jsonl");
    let (addr, _server) = start(config(2, 0, 60_000), &log, &dir.path().join("s.json"));
    let mut ws = connect(addr);
    send(&mut ws, json!({"type": "rating", "value": 0.5}));
    assert_eq!(recv(&mut ws)["code"], "not_ready");
    send(&mut ws, json!({"type": "ready"}));
    assert_eq!(recv(&mut ws)["type"], "trial_start");
    send(&mut ws, json!({"type": "rating", "value": 1.5}));
    assert_eq!(recv(&mut ws)["code"], "invalid_rating");
    ws.send(Message::text("{not json")).unwrap();
    assert_eq!(recv(&mut ws)["code"], "bad_message");
    send(&mut ws, json!({"type": "rating", "value": 0.25}));
    let t = recv(&mut ws);
    assert_eq!((t["type"].as_str(), t["last_reward"].as_f64()), (Some("telemetry"), Some(0.25)));
    send(&mut ws, json!({"type": "abort"}));
    std::thread::sleep(std::time::Duration::from_millis(100));
    assert_eq!(read_log(&log).unwrap().len(), 1);
}

#[test]
fn missing_rating_times_out_with_checkpoint() {
    let dir = tempdir().unwrap();
    let log = dir.path().join("s.jsonl");
    let (addr, _server) = start(config(3, 0, 300), &log, &dir.path().join("s.json"));
    let mut ws = connect(addr);
    send(&mut ws, json!({"type": "ready"}));
    assert_eq!(recv(&mut ws)["type"], "trial_start");
    send(&mut ws, json!({"type": "rating", "value": 0.5}));
    assert_eq!(recv(&mut ws)["type"], "telemetry");
    assert_eq!(recv(&mut ws)["type"], "trial_start");
    let m = recv(&mut ws);
    assert_eq!((m["type"].as_str(), m["code"].as_str()), (Some("error"), Some("timeout")));
    assert_eq!(read_log(&log).unwrap().len(), 1);

    let mut again = connect(addr);
    send(&mut again, json!({"type": "ready"}));
    let resumed = recv(&mut again);
    assert_eq!((resumed["type"].as_str(), resumed["trial"].as_u64()), (Some("trial_start"), Some(2)));
}
