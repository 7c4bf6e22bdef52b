//! Messages exchanged between the session service and UI clients.
//!
//! Each message is one WebSocket text frame holding a JSON object with a
//! `"type"` discriminator next to the payload fields. Unknown fields are
//! ignored when decoding.

use crate::chair::ChairParams;
use crate::input::{Calibration, DeviceDescriptor};
use crate::level::Level;
use crate::session::{Frame, SessionReport};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    UnknownLevel,
    BadMessage,
    SessionEnded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub level_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device_descriptor: Option<DeviceDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Calibration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Input {
    /// Client clock, seconds.
    pub t: f64,
    pub axes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Welcome {
    pub level: Level,
    pub params: ChairParams,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMsg {
    pub frame: Frame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ended {
    pub report: SessionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMsg {
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WireMessage {
    // client -> server
    Hello(Hello),
    Input(Input),
    End {},
    // server -> client
    Welcome(Box<Welcome>),
    Frame(Box<FrameMsg>),
    Ended(Box<Ended>),
    Error(ErrorMsg),
}

impl WireMessage {
    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        WireMessage::Error(ErrorMsg {
            code,
            message: message.into(),
        })
    }

    pub fn frame(frame: Frame) -> Self {
        WireMessage::Frame(Box::new(FrameMsg { frame }))
    }

    pub fn ended(report: SessionReport) -> Self {
        WireMessage::Ended(Box::new(Ended { report }))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            WireMessage::Hello(_) => "hello",
            WireMessage::Input(_) => "input",
            WireMessage::End {} => "end",
            WireMessage::Welcome(_) => "welcome",
            WireMessage::Frame(_) => "frame",
            WireMessage::Ended(_) => "ended",
            WireMessage::Error(_) => "error",
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("cannot decode message at `{path}`: {message}")]
pub struct DecodeError {
    pub path: String,
    pub message: String,
}

pub fn encode(msg: &WireMessage) -> String {
    serde_json::to_string(msg).expect("wire messages serialize")
}

fn payload<T: DeserializeOwned>(value: serde_json::Value) -> Result<T, DecodeError> {
    serde_path_to_error::deserialize(value).map_err(|e| DecodeError {
        path: e.path().to_string(),
        message: e.into_inner().to_string(),
    })
}

pub fn decode(text: &str) -> Result<WireMessage, DecodeError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| DecodeError {
        path: ".".into(),
        message: e.to_string(),
    })?;
    let kind = value
        .get("type")
        .and_then(|t| t.as_str())
        .ok_or_else(|| DecodeError {
            path: "type".into(),
            message: "missing message type".into(),
        })?
        .to_owned();
    Ok(match kind.as_str() {
        "hello" => WireMessage::Hello(payload(value)?),
        "input" => WireMessage::Input(payload(value)?),
        "end" => WireMessage::End {},
        "welcome" => WireMessage::Welcome(Box::new(payload(value)?)),
        "frame" => WireMessage::Frame(Box::new(payload(value)?)),
        "ended" => WireMessage::Ended(Box::new(payload(value)?)),
        "error" => WireMessage::Error(payload(value)?),
        other => {
            return Err(DecodeError {
                path: "type".into(),
                message: format!("unknown message type {other:?}"),
            })
        }
    })
}
