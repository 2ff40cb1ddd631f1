//! Wire format for external forecasters: one JSON object per line over the adapter's
//! stdin/stdout. See `docs/protocol.md` for the normative description.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "msg_type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Message {
    Hello {
        id: String,
        payload: Hello,
    },
    Capabilities {
        id: String,
        payload: Capabilities,
    },
    ForecastRequest {
        id: String,
        payload: ForecastRequest,
    },
    ForecastResponse {
        id: String,
        payload: ForecastResponse,
    },
    Error {
        id: String,
        payload: ErrorPayload,
    },
    Shutdown {
        id: String,
        #[serde(default)]
        payload: Empty,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Empty {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub protocol_version: u32,
    pub harness_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Capabilities {
    pub protocol_version: u32,
    pub model_id: String,
    #[serde(default)]
    pub quantiles: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRequest {
    pub context: Vec<f64>,
    pub horizon: usize,
    pub channel_index: usize,
    pub dt_lyap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResponse {
    pub values: Vec<f64>,
    /// Optional quantile forecasts keyed by level, e.g. `"0.1"`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub quantiles: BTreeMap<String, Vec<f64>>,
    pub inference_walltime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traceback: Option<String>,
}

impl Message {
    pub fn id(&self) -> &str {
        match self {
            Self::Hello { id, .. }
            | Self::Capabilities { id, .. }
            | Self::ForecastRequest { id, .. }
            | Self::ForecastResponse { id, .. }
            | Self::Error { id, .. }
            | Self::Shutdown { id, .. } => id,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Hello { .. } => "hello",
            Self::Capabilities { .. } => "capabilities",
            Self::ForecastRequest { .. } => "forecast_request",
            Self::ForecastResponse { .. } => "forecast_response",
            Self::Error { .. } => "error",
            Self::Shutdown { .. } => "shutdown",
        }
    }

    /// Serialize as a single line without the trailing newline.
    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("messages always serialize")
    }

    /// Parse one line, reporting the raw text on failure.
    pub fn decode(line: &str) -> Result<Self> {
        serde_json::from_str(line.trim_end_matches(['\r', '\n']))
            .map_err(|e| Error::ProtocolViolation(format!("{e}; raw message: {}", truncate(line, 400))))
    }
}

pub(crate) fn truncate(s: &str, max: usize) -> String {
    if s.len() <= max {
        return s.to_string();
    }
    let mut end = max;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}... ({} bytes)", &s[..end], s.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wire_shape() {
        let m = Message::ForecastRequest {
            id: "7".into(),
            payload: ForecastRequest {
                context: vec![1.0, 2.5],
                horizon: 3,
                channel_index: 0,
                dt_lyap: 0.5,
            },
        };
        let v: serde_json::Value = serde_json::from_str(&m.encode()).unwrap();
        assert_eq!(v["msg_type"], "forecast_request");
        assert_eq!(v["id"], "7");
        assert_eq!(v["payload"]["horizon"], 3);
        assert_eq!(Message::decode(&m.encode()).unwrap(), m);
        let s = Message::decode(r#"{"msg_type":"shutdown","id":"x"}"#).unwrap();
        assert_eq!(s.kind(), "shutdown");
    }

    #[test]
    fn malformed_messages_keep_the_raw_text() {
        let err = Message::decode("{\"msg_type\":\"forecast_response\",\"id\":1}").unwrap_err();
        assert!(matches!(&err, Error::ProtocolViolation(m) if m.contains("raw message")));
        assert!(Message::decode("not json").is_err());
        assert!(Message::decode(r#"{"msg_type":"bogus","id":"1","payload":{}}"#).is_err());
    }

    proptest! {
        #[test]
        fn floats_round_trip_bit_exactly(bits in proptest::collection::vec(any::<u64>(), 1..50)) {
            let values: Vec<f64> = bits.into_iter().map(f64::from_bits).filter(|v| v.is_finite()).collect();
            let m = Message::ForecastResponse {
                id: "r".into(),
                payload: ForecastResponse { values: values.clone(), quantiles: BTreeMap::new(), inference_walltime: 0.0 },
            };
            let Message::ForecastResponse { payload, .. } = Message::decode(&m.encode()).unwrap() else {
                panic!("wrong variant");
            };
            prop_assert!(payload.values.iter().zip(&values).all(|(a, b)| a.to_bits() == b.to_bits()));
            prop_assert_eq!(payload.values.len(), values.len());
        }
    }
}
