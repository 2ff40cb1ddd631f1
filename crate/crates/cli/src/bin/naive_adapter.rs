//! Reference adapter serving last-value forecasts over the line protocol. Fault-injection
//! flags make it misbehave on the n-th forecast request (1-based, counted per process).

use std::io::{BufRead, Write};
use std::time::{Duration, Instant};

use clap::Parser;

use chaosbench::io::protocol::{Capabilities, ErrorPayload, ForecastResponse, Message, PROTOCOL_VERSION};

#[derive(Parser)]
#[command(name = "chaosbench-naive-adapter")]
struct Opts {
    /// Never answer the n-th request.
    #[arg(long)]
    hang_on: Option<usize>,
    /// Answer the n-th request with a line that is not a protocol message.
    #[arg(long)]
    malformed_on: Option<usize>,
    /// Answer the n-th request with one value too few.
    #[arg(long)]
    short_on: Option<usize>,
    /// Exit with status 1 on receiving the n-th request.
    #[arg(long)]
    exit_on: Option<usize>,
    /// Report this protocol version in the handshake.
    #[arg(long, default_value_t = PROTOCOL_VERSION)]
    protocol_version: u32,
    /// Ignore shutdown messages.
    #[arg(long)]
    ignore_shutdown: bool,
}

fn send(out: &mut impl Write, msg: &Message) {
    writeln!(out, "{}", msg.encode())
        .and_then(|_| out.flush())
        .expect("stdout closed");
}

fn main() {
    let opts = Opts::parse();
    let stdin = std::io::stdin();
    let mut out = std::io::stdout().lock();
    let mut served = 0usize;
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let msg = match Message::decode(&line) {
            Ok(m) => m,
            Err(e) => {
                let payload = ErrorPayload {
                    message: e.to_string(),
                    traceback: None,
                };
                send(
                    &mut out,
                    &Message::Error {
                        id: String::new(),
                        payload,
                    },
                );
                continue;
            }
        };
        match msg {
            Message::Hello { id, .. } => {
                let payload = Capabilities {
                    protocol_version: opts.protocol_version,
                    model_id: "naive".into(),
                    quantiles: false,
                };
                send(&mut out, &Message::Capabilities { id, payload });
            }
            Message::ForecastRequest { id, payload } => {
                served += 1;
                let is = |flag: Option<usize>| flag == Some(served);
                if is(opts.exit_on) {
                    std::process::exit(1);
                }
                if is(opts.hang_on) {
                    loop {
                        std::thread::sleep(Duration::from_secs(3600));
                    }
                }
                if is(opts.malformed_on) {
                    writeln!(
                        out,
                        "{{\"msg_type\": \"forecast_response\", \"id\": \"{id}\", \"payload\": [1, 2"
                    )
                    .unwrap();
                    out.flush().unwrap();
                    continue;
                }
                let start = Instant::now();
                let Some(&last) = payload.context.last().filter(|_| payload.horizon > 0) else {
                    let payload = ErrorPayload {
                        message: "context must be non-empty and horizon >= 1".into(),
                        traceback: None,
                    };
                    send(&mut out, &Message::Error { id, payload });
                    continue;
                };
                let n = if is(opts.short_on) {
                    payload.horizon - 1
                } else {
                    payload.horizon
                };
                let response = ForecastResponse {
                    values: vec![last; n],
                    quantiles: Default::default(),
                    inference_walltime: start.elapsed().as_secs_f64(),
                };
                send(&mut out, &Message::ForecastResponse { id, payload: response });
            }
            Message::Shutdown { .. } if !opts.ignore_shutdown => break,
            _ => {}
        }
    }
}
