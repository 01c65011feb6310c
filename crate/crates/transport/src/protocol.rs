//! JSON messages exchanged over a session socket. Every message is an
//! object with a `"type"` field.

use serde::{Deserialize, Serialize};

use dynsong_core::curves::{CurveEdit, CurveLabel, EmotionSample};
use dynsong_core::theory::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportState {
    Stopped,
    Playing,
    Paused,
}

/// Events streamed from a session. Ticks are song-absolute at 480 PPQ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamEvent {
    NoteOn {
        tick: Tick,
        channel: u8,
        pitch: u8,
        velocity: u8,
    },
    NoteOff {
        tick: Tick,
        channel: u8,
        pitch: u8,
    },
    BarBoundary {
        bar: u32,
        tick: Tick,
        emotion: EmotionSample<f64>,
        bpm: u32,
    },
    TransportChanged {
        state: TransportState,
    },
}

impl StreamEvent {
    pub fn tick(&self) -> Option<Tick> {
        match self {
            StreamEvent::NoteOn { tick, .. } | StreamEvent::NoteOff { tick, .. } | StreamEvent::BarBoundary { tick, .. } => {
                Some(*tick)
            }
            StreamEvent::TransportChanged { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Play,
    Pause,
    Stop,
    Seek { bar: u32 },
    CurveEdit { curve: CurveLabel, op: CurveEdit<f64> },
    Save,
}

/// Replies addressed to the client that sent a command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Reply {
    Ack {
        command: String,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        effective_bar: Option<u32>,
    },
    Error {
        code: String,
        message: String,
    },
}

impl Reply {
    pub fn error(code: &str, message: impl Into<String>) -> Self {
        Reply::Error {
            code: code.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ServerMessage {
    Event(StreamEvent),
    Reply(Reply),
}
