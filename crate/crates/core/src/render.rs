//! Evaluated song to Standard MIDI File.
//!
//! Both the offline renderer and the live session log go through
//! [`assemble`], so the two paths produce the same bytes for the same notes.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::curves::CurveSet;
use crate::graph::{evaluate_song, BarInfo, EvalError, Registry, SongGraph};
use crate::midi::{write_midi, MidiError, TempoEvent, TrackPlan};
use crate::scalar::Scalar;
use crate::theory::{bar_to_tick, NoteSequence, PPQ};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Midi(#[from] MidiError),
    #[error("the song has no midi_sink node")]
    NoSinks,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderPlan {
    pub tracks: Vec<TrackPlan>,
    pub tempi: Vec<TempoEvent>,
}

/// One track per sink node in topo order, plus a tempo change at every bar
/// whose bpm differs from the previous one.
pub fn assemble(graph: &SongGraph, bars: &[BarInfo], sinks: &BTreeMap<String, NoteSequence>) -> Result<RenderPlan, RenderError> {
    let sink_nodes = graph.sinks();
    if sink_nodes.is_empty() {
        return Err(RenderError::NoSinks);
    }
    let tracks = sink_nodes
        .iter()
        .map(|n| {
            let name = n.params.get("name").and_then(|v| v.as_str()).unwrap_or("");
            let num = |k: &str| n.params.get(k).and_then(|v| v.as_i64()).unwrap_or(0);
            TrackPlan {
                name: if name.is_empty() { n.id.clone() } else { name.to_string() },
                channel: num("channel") as u8,
                program: num("program") as u8,
                events: sinks.get(&n.id).cloned().unwrap_or_default(),
            }
        })
        .collect();
    let mut tempi: Vec<TempoEvent> = Vec::new();
    for b in bars {
        if tempi.last().map(|t| t.bpm) != Some(b.bpm as f64) {
            tempi.push(TempoEvent {
                tick: bar_to_tick(b.bar_index as u64, graph.time_sig, PPQ),
                bpm: b.bpm as f64,
            });
        }
    }
    Ok(RenderPlan { tracks, tempi })
}

pub fn plan_to_midi(plan: &RenderPlan) -> Result<Vec<u8>, RenderError> {
    Ok(write_midi(&plan.tracks, &plan.tempi, PPQ)?)
}

/// Evaluates the whole song and writes it as MIDI bytes.
pub fn render_song<S: Scalar>(graph: &SongGraph, registry: &Registry, curves: &CurveSet<S>) -> Result<Vec<u8>, RenderError> {
    let out = evaluate_song(graph, registry, curves)?;
    plan_to_midi(&assemble(graph, &out.bars, &out.sinks)?)
}
