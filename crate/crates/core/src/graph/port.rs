use std::fmt;

use serde::{Deserialize, Serialize};

use crate::generators::{ChordProgression, RhythmPattern};
use crate::theory::NoteSequence;

/// Kind of data a port carries. Each kind has a fixed display colour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PortType {
    Chords,
    Notes,
    Rhythm,
    Param,
}

impl PortType {
    pub const ALL: [PortType; 4] = [PortType::Chords, PortType::Notes, PortType::Rhythm, PortType::Param];

    pub fn colour(self) -> &'static str {
        match self {
            PortType::Chords => "#e0a030",
            PortType::Notes => "#3a86ff",
            PortType::Rhythm => "#2a9d8f",
            PortType::Param => "#b5179e",
        }
    }
}

impl fmt::Display for PortType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortDirection {
    Input,
    Output,
}

/// What an input receives when nothing is connected to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputDefault {
    /// Must be connected.
    Required,
    /// The value of the named block parameter (Param ports only).
    FromParam { param: String },
    /// The block substitutes its own documented fallback.
    Fallback { description: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: PortType,
    pub direction: PortDirection,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub default: Option<InputDefault>,
}

impl PortSpec {
    pub fn input(name: &str, ty: PortType, default: InputDefault) -> Self {
        PortSpec {
            name: name.to_string(),
            ty,
            direction: PortDirection::Input,
            default: Some(default),
        }
    }

    pub fn output(name: &str, ty: PortType) -> Self {
        PortSpec {
            name: name.to_string(),
            ty,
            direction: PortDirection::Output,
            default: None,
        }
    }

    pub fn is_required(&self) -> bool {
        matches!(self.default, Some(InputDefault::Required))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PortValue {
    Chords(ChordProgression),
    Notes(NoteSequence),
    Rhythm(RhythmPattern),
    Param(f64),
}

impl PortValue {
    pub fn port_type(&self) -> PortType {
        match self {
            PortValue::Chords(_) => PortType::Chords,
            PortValue::Notes(_) => PortType::Notes,
            PortValue::Rhythm(_) => PortType::Rhythm,
            PortValue::Param(_) => PortType::Param,
        }
    }

    pub fn as_chords(&self) -> Option<&ChordProgression> {
        match self {
            PortValue::Chords(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_notes(&self) -> Option<&NoteSequence> {
        match self {
            PortValue::Notes(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_rhythm(&self) -> Option<&RhythmPattern> {
        match self {
            PortValue::Rhythm(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_param(&self) -> Option<f64> {
        match self {
            PortValue::Param(v) => Some(*v),
            _ => None,
        }
    }
}
