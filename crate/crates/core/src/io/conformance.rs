//! Protocol conformance suite run by `serve-check` against an adapter command.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::adapter::{Connection, RecvFailure};
use super::protocol::{ForecastRequest, Message};
use crate::error::{Error, Result};

/// Deadline for the hello/capabilities round trip.
pub const HANDSHAKE_BUDGET: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformanceReport {
    pub model_id: Option<String>,
    pub checks: Vec<CheckResult>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }
}

fn request(id: &str, context: Vec<f64>, horizon: usize) -> Message {
    Message::ForecastRequest {
        id: id.into(),
        payload: ForecastRequest {
            context,
            horizon,
            channel_index: 0,
            dt_lyap: 1.0 / 30.0,
        },
    }
}

fn expect_values(conn: &mut Connection, id: &str, horizon: usize, timeout: Duration) -> Result<Vec<f64>> {
    match conn.recv(timeout).map_err(|f| f.into_error(timeout))? {
        Message::ForecastResponse { id: rid, payload } if rid == id => {
            if payload.values.len() != horizon {
                return Err(Error::ProtocolViolation(format!(
                    "{} values for horizon {horizon}",
                    payload.values.len()
                )));
            }
            if !(payload.inference_walltime >= 0.0) {
                return Err(Error::ProtocolViolation("negative inference_walltime".into()));
            }
            Ok(payload.values)
        }
        other => Err(Error::ProtocolViolation(format!(
            "expected response to {id}, got {}",
            other.encode()
        ))),
    }
}

/// Run every check against a fresh adapter process started from `command`.
/// `timeout` bounds each individual response.
pub fn run_conformance(command: &[String], timeout: Duration) -> ConformanceReport {
    let mut checks = Vec::new();
    let mut record = |name: &str, r: Result<String>| {
        let (passed, detail) = match r {
            Ok(d) => (true, d),
            Err(e) => (false, e.to_string()),
        };
        checks.push(CheckResult {
            name: name.into(),
            passed,
            detail,
        });
    };
    let mut conn = match Connection::spawn(command) {
        Ok(c) => c,
        Err(e) => {
            record("spawn", Err(e));
            return ConformanceReport { model_id: None, checks };
        }
    };
    let start = Instant::now();
    let caps = conn.handshake(HANDSHAKE_BUDGET);
    let elapsed = start.elapsed();
    let model_id = caps.as_ref().ok().map(|c| c.model_id.clone());
    record(
        "handshake",
        caps.map(|c| format!("model `{}` answered in {:.3} s", c.model_id, elapsed.as_secs_f64())),
    );
    if model_id.is_none() {
        return ConformanceReport { model_id, checks };
    }

    let context: Vec<f64> = (0..512).map(|i| (i as f64 * 0.1).sin()).collect();
    record(
        "horizon_300",
        (|| {
            conn.send(&request("h300", context.clone(), 300))?;
            expect_values(&mut conn, "h300", 300, timeout)?;
            Ok("300 values".into())
        })(),
    );
    record(
        "horizon_1",
        (|| {
            conn.send(&request("h1", vec![0.5, -0.25], 1))?;
            expect_values(&mut conn, "h1", 1, timeout)?;
            Ok("1 value".into())
        })(),
    );
    record(
        "extreme_values",
        (|| {
            let ctx = vec![0.1, -1e-300, 2.5e300, 5e-324, std::f64::consts::PI, -0.0, 1.0 / 3.0];
            conn.send(&request("ext", ctx, 4))?;
            expect_values(&mut conn, "ext", 4, timeout)?;
            Ok("full-precision context accepted".into())
        })(),
    );
    record(
        "pipelined_ids",
        (|| {
            let ids = ["p1", "p2", "p3"];
            for (i, id) in ids.iter().enumerate() {
                conn.send(&request(id, context[..64 + i].to_vec(), 5 + i))?;
            }
            let mut seen = BTreeSet::new();
            for _ in 0..ids.len() {
                match conn.recv(timeout).map_err(|f| f.into_error(timeout))? {
                    Message::ForecastResponse { id, payload } => {
                        let Some(i) = ids.iter().position(|x| *x == id) else {
                            return Err(Error::ProtocolViolation(format!("unknown response id `{id}`")));
                        };
                        if payload.values.len() != 5 + i {
                            return Err(Error::ProtocolViolation(format!("wrong length for `{id}`")));
                        }
                        if !seen.insert(id.clone()) {
                            return Err(Error::ProtocolViolation(format!("`{id}` answered twice")));
                        }
                    }
                    other => return Err(Error::ProtocolViolation(format!("unexpected {}", other.encode()))),
                }
            }
            Ok("3 requests answered once each".into())
        })(),
    );
    record(
        "invalid_request_reports_error",
        (|| {
            conn.send(&request("bad", Vec::new(), 0))?;
            match conn.recv(timeout).map_err(|f| f.into_error(timeout))? {
                Message::Error { id, .. } if id == "bad" => {}
                other => {
                    return Err(Error::ProtocolViolation(format!(
                        "expected error for `bad`, got {}",
                        other.encode()
                    )))
                }
            }
            conn.send(&request("after", vec![1.0, 2.0], 2))?;
            expect_values(&mut conn, "after", 2, timeout)?;
            Ok("error returned and adapter kept serving".into())
        })(),
    );
    record(
        "shutdown",
        (|| {
            conn.send(&Message::Shutdown {
                id: "bye".into(),
                payload: Default::default(),
            })?;
            match conn.wait_exit(Duration::from_secs(5)) {
                Some(s) if s.success() => Ok(format!("exited ({s})")),
                Some(s) => Err(Error::Adapter(format!("exited with failure ({s})"))),
                None => match conn.recv_line(Duration::from_millis(10)) {
                    Err(RecvFailure::Closed(Some(s))) if s.success() => Ok(format!("exited ({s})")),
                    _ => Err(Error::Adapter("still running 5 s after shutdown".into())),
                },
            }
        })(),
    );
    ConformanceReport { model_id, checks }
}
