//! Harness side of the external-forecaster protocol: process management, handshake,
//! per-request timeouts, restarts and fail-fast on adapter exit.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, ExitStatus, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde_json::json;

use super::protocol::{Capabilities, ForecastRequest, Hello, Message, PROTOCOL_VERSION};
use crate::error::{Error, Result};
use crate::forecasters::{Forecast, ForecastTask, Forecaster};
use crate::HARNESS_VERSION;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);
/// Upper bound on the hello/capabilities exchange.
pub const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(30);
const SHUTDOWN_GRACE: Duration = Duration::from_secs(2);

/// Why a read from the adapter produced no usable message.
#[derive(Debug)]
pub enum RecvFailure {
    Timeout,
    /// Stdout closed; carries the exit status when the process has already exited.
    Closed(Option<ExitStatus>),
    Violation(Error),
}

impl RecvFailure {
    pub fn into_error(self, timeout: Duration) -> Error {
        match self {
            Self::Timeout => Error::Adapter(format!("no response within {:.1} s", timeout.as_secs_f64())),
            Self::Closed(status) => Error::Adapter(match status {
                Some(s) => format!("adapter exited ({s})"),
                None => "adapter closed its output stream".into(),
            }),
            Self::Violation(e) => e,
        }
    }
}

/// A running adapter process with line-oriented access to its streams.
pub struct Connection {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<String>,
}

impl Connection {
    pub fn spawn(command: &[String]) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::Adapter("empty adapter command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Adapter(format!("cannot start `{}`: {e}", command.join(" "))))?;
        let stdout = child.stdout.take().expect("piped stdout");
        let stdin = child.stdin.take();
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            child,
            stdin,
            lines: rx,
        })
    }

    pub fn send(&mut self, msg: &Message) -> Result<()> {
        self.send_raw(&msg.encode())
    }

    /// Write one line verbatim (used by the conformance suite for negative tests).
    pub fn send_raw(&mut self, line: &str) -> Result<()> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| Error::Adapter("adapter stdin already closed".into()))?;
        writeln!(stdin, "{line}").and_then(|_| stdin.flush()).map_err(|e| {
            let status = self.child.try_wait().ok().flatten();
            Error::Adapter(match status {
                Some(s) => format!("adapter exited ({s})"),
                None => format!("write to adapter failed: {e}"),
            })
        })
    }

    pub fn recv_line(&mut self, timeout: Duration) -> std::result::Result<String, RecvFailure> {
        match self.lines.recv_timeout(timeout) {
            Ok(line) => Ok(line),
            Err(RecvTimeoutError::Timeout) => Err(RecvFailure::Timeout),
            Err(RecvTimeoutError::Disconnected) => Err(RecvFailure::Closed(self.wait_briefly())),
        }
    }

    pub fn recv(&mut self, timeout: Duration) -> std::result::Result<Message, RecvFailure> {
        let line = self.recv_line(timeout)?;
        Message::decode(&line).map_err(RecvFailure::Violation)
    }

    /// Close stdin so the adapter sees end of input.
    pub fn close_stdin(&mut self) {
        self.stdin = None;
    }

    fn wait_briefly(&mut self) -> Option<ExitStatus> {
        let deadline = Instant::now() + Duration::from_millis(500);
        loop {
            match self.child.try_wait() {
                Ok(Some(s)) => return Some(s),
                Ok(None) if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(5)),
                _ => return None,
            }
        }
    }

    /// Wait up to `grace` for the process to exit on its own.
    pub fn wait_exit(&mut self, grace: Duration) -> Option<ExitStatus> {
        let deadline = Instant::now() + grace;
        loop {
            match self.child.try_wait() {
                Ok(Some(s)) => return Some(s),
                Ok(None) if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(5)),
                _ => return None,
            }
        }
    }

    pub fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    /// Polite shutdown: send `shutdown`, wait briefly, then kill.
    pub fn shutdown(&mut self) {
        let _ = self.send(&Message::Shutdown {
            id: "shutdown".into(),
            payload: Default::default(),
        });
        self.close_stdin();
        if self.wait_exit(SHUTDOWN_GRACE).is_none() {
            self.kill();
        }
    }

    /// Send `hello` and wait for `capabilities`.
    pub fn handshake(&mut self, timeout: Duration) -> Result<Capabilities> {
        self.send(&Message::Hello {
            id: "hello".into(),
            payload: Hello {
                protocol_version: PROTOCOL_VERSION,
                harness_version: HARNESS_VERSION.into(),
            },
        })?;
        match self.recv(timeout).map_err(|f| f.into_error(timeout))? {
            Message::Capabilities { id, payload } if id == "hello" => {
                if payload.protocol_version != PROTOCOL_VERSION {
                    return Err(Error::ProtocolViolation(format!(
                        "adapter speaks protocol {} (harness speaks {PROTOCOL_VERSION})",
                        payload.protocol_version
                    )));
                }
                Ok(payload)
            }
            other => Err(Error::ProtocolViolation(format!(
                "expected capabilities for id `hello`, got {}: {}",
                other.kind(),
                other.encode()
            ))),
        }
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Ok(None) = self.child.try_wait() {
            self.kill();
        }
    }
}

struct Session {
    conn: Connection,
    next_id: u64,
}

/// Outcome of one request, deciding what happens to the session.
enum Outcome {
    Done(Forecast),
    /// Adapter answered with an error message; the session stays usable.
    Refused(Error),
    /// Session is unusable (timeout, protocol violation) and is discarded.
    Broken(Error),
    /// Adapter process is gone.
    Exited(Error),
}

impl Session {
    fn start(command: &[String], timeout: Duration) -> Result<Self> {
        let mut conn = Connection::spawn(command)?;
        conn.handshake(timeout.min(HANDSHAKE_TIMEOUT))?;
        Ok(Self { conn, next_id: 0 })
    }

    fn request(&mut self, task: &ForecastTask, timeout: Duration, model_id: &str) -> Outcome {
        self.next_id += 1;
        let id = format!("r{}", self.next_id);
        let req = Message::ForecastRequest {
            id: id.clone(),
            payload: ForecastRequest {
                context: task.context.clone(),
                horizon: task.horizon,
                channel_index: task.channel_index,
                dt_lyap: task.dt_lyap,
            },
        };
        let start = Instant::now();
        if let Err(e) = self.conn.send(&req) {
            return Outcome::Exited(e);
        }
        let msg = match self.conn.recv(timeout) {
            Ok(m) => m,
            Err(RecvFailure::Timeout) => {
                return Outcome::Broken(Error::Adapter(format!(
                    "request {id} timed out after {:.1} s; adapter restarted",
                    timeout.as_secs_f64()
                )))
            }
            Err(f @ RecvFailure::Closed(_)) => return Outcome::Exited(f.into_error(timeout)),
            Err(RecvFailure::Violation(e)) => return Outcome::Broken(e),
        };
        let roundtrip = start.elapsed().as_secs_f64();
        match msg {
            Message::ForecastResponse { id: rid, payload } if rid == id => {
                if payload.values.len() != task.horizon {
                    return Outcome::Broken(Error::ProtocolViolation(format!(
                        "response {id} has {} values, requested horizon {}",
                        payload.values.len(),
                        task.horizon
                    )));
                }
                if let Some((q, v)) = payload.quantiles.iter().find(|(_, v)| v.len() != task.horizon) {
                    return Outcome::Broken(Error::ProtocolViolation(format!(
                        "quantile {q} of response {id} has {} values, requested horizon {}",
                        v.len(),
                        task.horizon
                    )));
                }
                let mut f = Forecast::new(payload.values, model_id);
                f.inference_walltime = payload.inference_walltime;
                f = f.with_meta("roundtrip_walltime", roundtrip);
                if !payload.quantiles.is_empty() {
                    f = f.with_meta("quantiles", json!(payload.quantiles));
                }
                Outcome::Done(f)
            }
            Message::Error { id: rid, payload } if rid == id => {
                let mut m = payload.message;
                if let Some(tb) = payload.traceback {
                    m = format!("{m}\n{tb}");
                }
                Outcome::Refused(Error::Adapter(m))
            }
            other => Outcome::Broken(Error::ProtocolViolation(format!(
                "expected forecast_response for id `{id}`, got {}: {}",
                other.kind(),
                super::protocol::truncate(&other.encode(), 400)
            ))),
        }
    }
}

/// An external model reached through the adapter protocol. Each concurrent caller gets
/// its own adapter process; idle processes are reused.
pub struct AdapterForecaster {
    name: String,
    command: Vec<String>,
    timeout: Duration,
    idle: Mutex<Vec<Session>>,
    exited: Mutex<Option<String>>,
    restarts: AtomicUsize,
}

impl AdapterForecaster {
    pub fn new(name: impl Into<String>, command: Vec<String>, timeout: Duration) -> Self {
        Self {
            name: name.into(),
            command,
            timeout,
            idle: Mutex::new(Vec::new()),
            exited: Mutex::new(None),
            restarts: AtomicUsize::new(0),
        }
    }

    /// Processes replaced after a timeout or protocol violation.
    pub fn restarts(&self) -> usize {
        self.restarts.load(Ordering::Relaxed)
    }

    /// Reason the adapter was given up on, if it was.
    pub fn exit_reason(&self) -> Option<String> {
        self.exited.lock().expect("poisoned").clone()
    }

    fn give_up(&self, reason: &str) {
        self.exited
            .lock()
            .expect("poisoned")
            .get_or_insert_with(|| reason.to_string());
    }

    fn forecast_with(&self, task: &ForecastTask) -> Result<Forecast> {
        if let Some(r) = self.exit_reason() {
            return Err(Error::Adapter(format!("skipped: adapter unavailable ({r})")));
        }
        let pooled = self.idle.lock().expect("poisoned").pop();
        let mut session = match pooled {
            Some(s) => s,
            None => Session::start(&self.command, self.timeout).map_err(|e| {
                self.give_up(&e.to_string());
                e
            })?,
        };
        match session.request(task, self.timeout, &self.id()) {
            Outcome::Done(f) => {
                self.idle.lock().expect("poisoned").push(session);
                Ok(f)
            }
            Outcome::Refused(e) => {
                self.idle.lock().expect("poisoned").push(session);
                Err(e)
            }
            Outcome::Broken(e) => {
                session.conn.kill();
                self.restarts.fetch_add(1, Ordering::Relaxed);
                Err(e)
            }
            Outcome::Exited(e) => {
                self.give_up(&e.to_string());
                Err(e)
            }
        }
    }
}

impl Forecaster for AdapterForecaster {
    fn id(&self) -> String {
        format!("adapter:{}", self.name)
    }

    fn forecast(&self, task: &ForecastTask) -> Result<Forecast> {
        self.forecast_with(task)
    }
}

impl Drop for AdapterForecaster {
    fn drop(&mut self) {
        for mut s in self.idle.get_mut().expect("poisoned").drain(..) {
            s.conn.shutdown();
        }
    }
}
