//! Curve file: `{"energy": [[t, v], ...], "valence": [...], "complexity": [...]}`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ControlPoint, Curve, CurveError, CurveLabel, CurveSet};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum CurveFileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: {curve} curve: {source}")]
    Invalid {
        line: usize,
        curve: CurveLabel,
        #[source]
        source: CurveError,
    },
}

impl CurveFileError {
    pub fn line(&self) -> Option<usize> {
        match self {
            CurveFileError::Io { .. } => None,
            CurveFileError::Syntax { line, .. } | CurveFileError::Invalid { line, .. } => Some(*line),
        }
    }
}

/// Raw point lists as they appear on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(serialize = "S: Scalar + Serialize", deserialize = "S: Scalar + Deserialize<'de>"))]
pub struct CurvePointsDoc<S> {
    pub energy: Vec<ControlPoint<S>>,
    pub valence: Vec<ControlPoint<S>>,
    pub complexity: Vec<ControlPoint<S>>,
}

impl<S: Scalar> CurvePointsDoc<S> {
    pub fn into_curve_set(self) -> Result<CurveSet<S>, (CurveLabel, CurveError)> {
        let build = |label, pts| Curve::new(label, pts).map_err(|e| (label, e));
        Ok(CurveSet::new(
            build(CurveLabel::Energy, self.energy)?,
            build(CurveLabel::Valence, self.valence)?,
            build(CurveLabel::Complexity, self.complexity)?,
        ))
    }
}

impl<S: Scalar + Serialize> CurveSet<S> {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("curve set serializes")
    }
}

impl<S: Scalar + for<'de> Deserialize<'de>> CurveSet<S> {
    /// Parses and validates a curve document, reporting the line of the
    /// offending point on invariant violations.
    pub fn from_json_str(text: &str) -> Result<Self, CurveFileError> {
        let doc: CurvePointsDoc<S> = serde_json::from_str(text).map_err(|e| CurveFileError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        doc.into_curve_set().map_err(|(curve, source)| {
            let index = match &source {
                CurveError::Unsorted { index } | CurveError::NonFinite { index } => Some(*index),
                _ => None,
            };
            CurveFileError::Invalid {
                line: locate_point(text, curve.as_str(), index).unwrap_or(1),
                curve,
                source,
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, CurveFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| CurveFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Line of the top-level `key` member, or of its `index`-th point.
fn locate_point(text: &str, key: &str, index: Option<usize>) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut i = 0;
    let mut key_at = None;
    while i < bytes.len() {
        match bytes[i] {
            b'"' => {
                let start = i + 1;
                i += 1;
                while i < bytes.len() && bytes[i] != b'"' {
                    if bytes[i] == b'\\' {
                        i += 1;
                    }
                    i += 1;
                }
                if depth == 1 && &text[start..i.min(text.len())] == key {
                    key_at = Some(start - 1);
                    break;
                }
            }
            b'{' | b'[' => depth += 1,
            b'}' | b']' => depth = depth.saturating_sub(1),
            _ => {}
        }
        i += 1;
    }
    let key_at = key_at?;
    let Some(index) = index else {
        return Some(line_of(text, key_at));
    };
    // walk the value array: each bracket opening at nesting 2 starts a point
    let mut nesting = 0usize;
    let mut seen = 0usize;
    for (off, b) in bytes.iter().enumerate().skip(key_at + key.len() + 2) {
        match b {
            b'[' => {
                nesting += 1;
                if nesting == 2 {
                    if seen == index {
                        return Some(line_of(text, off));
                    }
                    seen += 1;
                }
            }
            b']' => {
                nesting = nesting.saturating_sub(1);
                if nesting == 0 {
                    break;
                }
            }
            _ => {}
        }
    }
    Some(line_of(text, key_at))
}
