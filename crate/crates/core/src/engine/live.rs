//! Live explicit-feedback sessions over WebSocket (the console protocol).
//!
//! Server to client:
//! - `{"type":"trial_start","trial":n,"block":"explicit","condition":a,"proxies":{"color":true,"sound":..,"vibration":..}}`
//! - `{"type":"telemetry","t":n,"q":[..4],"alpha":..,"epsilon":..,"last_reward":..}`
//! - `{"type":"converged","action":a,"steps":n}`
//! - `{"type":"session_end","converged":a|null,"trials":n}`
//! - `{"type":"error","code":"..","msg":".."}`
//!
//! Client to server: `{"type":"ready"}`, `{"type":"rating","value":0..1}`,
//! `{"type":"abort"}`.
//!
//! One session at a time: a second connection gets an error with code
//! `busy` and is closed. Every trial is appended to the log before telemetry
//! is sent, so a dropped connection, an abort or a rating timeout leaves a
//! checkpoint; the next connection resumes from it.

use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tungstenite::{Message, WebSocket};

use crate::analysis::{Outcome, training_means, truth_from_means};
use crate::bandit::{ActionId, NUM_ACTIONS, Reward, RewardSource};
use crate::engine::config::ExperimentConfig;
use crate::engine::log::{Block, LogWriter, block_records, read_log};
use crate::engine::session::{AdaptiveRun, stream, stream_rng, training_order, training_record};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proxies {
    pub color: bool,
    pub sound: bool,
    pub vibration: bool,
}

impl From<ActionId> for Proxies {
    fn from(a: ActionId) -> Self {
        Self {
            color: true,
            sound: a.has_sound(),
            vibration: a.has_vibration(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    TrialStart {
        trial: u64,
        block: Block,
        condition: ActionId,
        proxies: Proxies,
    },
    Telemetry {
        t: u64,
        q: [f64; NUM_ACTIONS],
        alpha: f64,
        epsilon: f64,
        last_reward: f64,
    },
    Converged {
        action: ActionId,
        steps: usize,
    },
    SessionEnd {
        converged: Option<ActionId>,
        trials: usize,
    },
    Error {
        code: String,
        msg: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Ready,
    Rating { value: f64 },
    Abort,
}

/// Written when a live session completes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveReport {
    pub seed: u64,
    pub log: PathBuf,
    pub training_trials: usize,
    pub trials: usize,
    pub converged: Option<ActionId>,
    pub steps: Option<usize>,
    /// Known only when a warm-up block defined the ground truth.
    pub truth: Option<ActionId>,
    pub training_means: Option<[f64; NUM_ACTIONS]>,
    pub outcome: Option<Outcome>,
}

#[derive(Debug)]
enum SessionEnd {
    Finished(LiveReport),
    Interrupted(&'static str),
}

enum Event {
    Rating(f64),
    Interrupted(&'static str),
}

pub struct LiveServer {
    listener: TcpListener,
    config: ExperimentConfig,
    log_path: PathBuf,
    report_path: Option<PathBuf>,
}

type Ws = WebSocket<TcpStream>;

fn send(ws: &mut Ws, msg: &ServerMessage) -> Result<()> {
    let text = serde_json::to_string(msg)?;
    ws.send(Message::text(text)).map_err(|e| Error::Live(e.to_string()))
}

fn send_error(ws: &mut Ws, code: &str, msg: impl Into<String>) -> Result<()> {
    send(
        ws,
        &ServerMessage::Error {
            code: code.into(),
            msg: msg.into(),
        },
    )
}

fn reject_busy(stream: TcpStream) {
    if let Ok(mut ws) = tungstenite::accept(stream) {
        let _ = send_error(&mut ws, "busy", "a session is already in progress");
        let _ = ws.close(None);
        let _ = ws.flush();
    }
}

impl LiveServer {
    pub fn bind(addr: &str, config: ExperimentConfig, log_path: &Path, report_path: Option<&Path>) -> Result<Self> {
        config.validate()?;
        let listener = TcpListener::bind(addr)?;
        Ok(Self {
            listener,
            config,
            log_path: log_path.to_path_buf(),
            report_path: report_path.map(Path::to_path_buf),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Serves connections until one session completes.
    pub fn serve(self) -> Result<LiveReport> {
        self.listener.set_nonblocking(true)?;
        let (done_tx, done_rx) = mpsc::channel::<Result<SessionEnd>>();
        let mut busy = false;
        let epoch = Instant::now();
        loop {
            match done_rx.try_recv() {
                Ok(Ok(SessionEnd::Finished(report))) => {
                    if let Some(p) = &self.report_path {
                        std::fs::write(p, serde_json::to_string_pretty(&report)? + "\n")?;
                    }
                    return Ok(report);
                }
                Ok(Ok(SessionEnd::Interrupted(why))) => {
                    println!("connection ended ({why}); progress checkpointed");
                    busy = false;
                }
                Ok(Err(e)) => return Err(e),
                Err(_) => {}
            }
            match self.listener.accept() {
                Ok((stream, _)) => {
                    stream.set_nonblocking(false)?;
                    if busy {
                        std::thread::spawn(move || reject_busy(stream));
                        continue;
                    }
                    busy = true;
                    let tx = done_tx.clone();
                    let config = self.config.clone();
                    let log_path = self.log_path.clone();
                    std::thread::spawn(move || {
                        let _ = tx.send(run_connection(stream, &config, &log_path, epoch));
                    });
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(10)),
                Err(e) => return Err(e.into()),
            }
        }
    }
}

fn await_rating(ws: &mut Ws, timeout: Duration) -> Result<Event> {
    let deadline = Instant::now() + timeout;
    loop {
        let left = deadline.saturating_duration_since(Instant::now());
        if left.is_zero() {
            let _ = send_error(ws, "timeout", "no rating within the configured window; session checkpointed");
            let _ = ws.close(None);
            let _ = ws.flush();
            return Ok(Event::Interrupted("timeout"));
        }
        ws.get_ref().set_read_timeout(Some(left))?;
        let msg = match ws.read() {
            Ok(m) => m,
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => continue,
            Err(_) => return Ok(Event::Interrupted("disconnected")),
        };
        let text = match msg {
            Message::Text(t) => t,
            Message::Close(_) => return Ok(Event::Interrupted("disconnected")),
            _ => continue,
        };
        match serde_json::from_str::<ClientMessage>(text.as_str()) {
            Ok(ClientMessage::Rating { value }) if value.is_finite() && (0.0..=1.0).contains(&value) => {
                return Ok(Event::Rating(value));
            }
            Ok(ClientMessage::Rating { value }) => send_error(ws, "invalid_rating", format!("rating {value} outside [0, 1]"))?,
            Ok(ClientMessage::Ready) => {}
            Ok(ClientMessage::Abort) => {
                let _ = ws.close(None);
                let _ = ws.flush();
                return Ok(Event::Interrupted("aborted"));
            }
            Err(e) => send_error(ws, "bad_message", e.to_string())?,
        }
    }
}

fn await_ready(ws: &mut Ws, timeout: Duration) -> Result<bool> {
    let deadline = Instant::now() + timeout;
    loop {
        let left = deadline.saturating_duration_since(Instant::now());
        if left.is_zero() {
            return Ok(false);
        }
        ws.get_ref().set_read_timeout(Some(left))?;
        match ws.read() {
            Ok(Message::Text(t)) => match serde_json::from_str::<ClientMessage>(t.as_str()) {
                Ok(ClientMessage::Ready) => return Ok(true),
                Ok(ClientMessage::Abort) => return Ok(false),
                Ok(_) => send_error(ws, "not_ready", "send ready before rating")?,
                Err(e) => send_error(ws, "bad_message", e.to_string())?,
            },
            Ok(Message::Close(_)) => return Ok(false),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(_) => return Ok(false),
        }
    }
}

fn run_connection(stream: TcpStream, config: &ExperimentConfig, log_path: &Path, epoch: Instant) -> Result<SessionEnd> {
    let Ok(mut ws) = tungstenite::accept(stream) else {
        return Ok(SessionEnd::Interrupted("handshake failed"));
    };
    let timeout = Duration::from_millis(config.live.rating_timeout_ms);
    if !await_ready(&mut ws, timeout)? {
        return Ok(SessionEnd::Interrupted("not ready"));
    }
    let wall = || epoch.elapsed().as_millis() as u64;
    let existing = if log_path.exists() { read_log(log_path)? } else { Vec::new() };
    let mut training = block_records(&existing, Block::Training);
    let adaptive = block_records(&existing, Block::Explicit);
    let mut writer = LogWriter::append(log_path)?;

    let per_condition = config.live.training_per_condition;
    let order = training_order(per_condition, &mut stream_rng(config.seed, stream::TRAINING_ORDER));
    if !adaptive.is_empty() && training.len() < order.len() {
        return Err(Error::Live("log has adaptive trials before the warm-up finished".into()));
    }
    for (i, &condition) in order.iter().enumerate().skip(training.len()) {
        let trial = i as u64 + 1;
        send(
            &mut ws,
            &ServerMessage::TrialStart {
                trial,
                block: Block::Training,
                condition,
                proxies: condition.into(),
            },
        )?;
        let value = match await_rating(&mut ws, timeout)? {
            Event::Rating(v) => v,
            Event::Interrupted(why) => return Ok(SessionEnd::Interrupted(why)),
        };
        let record = training_record(&config.agent, trial, condition, value, wall());
        writer.push(&record)?;
        send(
            &mut ws,
            &ServerMessage::Telemetry {
                t: trial,
                q: record.q_snapshot,
                alpha: record.alpha_t,
                epsilon: record.epsilon_t,
                last_reward: value,
            },
        )?;
        training.push(record);
    }

    let mut rng = stream_rng(config.seed, stream::EXPLICIT_AGENT);
    let mut run = AdaptiveRun::resume(&config.agent, Block::Explicit, adaptive, &mut rng)?;
    while let Some(condition) = run.next_condition(&mut rng) {
        send(
            &mut ws,
            &ServerMessage::TrialStart {
                trial: run.records().len() as u64 + 1,
                block: Block::Explicit,
                condition,
                proxies: condition.into(),
            },
        )?;
        let value = match await_rating(&mut ws, timeout)? {
            Event::Rating(v) => v,
            Event::Interrupted(why) => return Ok(SessionEnd::Interrupted(why)),
        };
        let record = run.submit(Reward::new(value, RewardSource::Explicit)?, wall())?.clone();
        writer.push(&record)?;
        send(
            &mut ws,
            &ServerMessage::Telemetry {
                t: record.t,
                q: record.q_snapshot,
                alpha: record.alpha_t,
                epsilon: record.epsilon_t,
                last_reward: record.reward,
            },
        )?;
        if let Some(action) = record.converged {
            send(
                &mut ws,
                &ServerMessage::Converged {
                    action,
                    steps: run.records().len(),
                },
            )?;
        }
    }

    let converged = run.converged();
    let trials = run.records().len();
    send(&mut ws, &ServerMessage::SessionEnd { converged, trials })?;
    let _ = ws.close(None);
    let _ = ws.flush();

    let means = (!training.is_empty()).then(|| training_means(&training));
    let truth = means.as_ref().and_then(truth_from_means);
    Ok(SessionEnd::Finished(LiveReport {
        seed: config.seed,
        log: log_path.to_path_buf(),
        training_trials: training.len(),
        trials,
        converged,
        steps: converged.map(|_| trials),
        truth,
        training_means: means,
        outcome: truth.map(|t| Outcome::classify(converged, t)),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn messages_use_protocol_shape() {
        let m = ServerMessage::TrialStart {
            trial: 1,
            block: Block::Explicit,
            condition: ActionId::VISUAL_SOUND,
            proxies: ActionId::VISUAL_SOUND.into(),
        };
        let v: serde_json::Value = serde_json::to_value(&m).unwrap();
        assert_eq!(v["type"], "trial_start");
        assert_eq!(v["condition"], 1);
        assert_eq!(v["proxies"]["sound"], true);
        assert_eq!(v["proxies"]["vibration"], false);
        let c: ClientMessage = serde_json::from_str(r#"{"type":"rating","value":0.5}"#).unwrap();
        assert_eq!(c, ClientMessage::Rating { value: 0.5 });
        assert!(serde_json::from_str::<ClientMessage>(r#"{"type":"dance"}"#).is_err());
    }
}
