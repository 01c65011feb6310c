use std::collections::{BTreeMap, VecDeque};

use dynsong_core::graph::{BarInfo, SongGraph};
use dynsong_core::render::{assemble, plan_to_midi, RenderError};
use dynsong_core::theory::{NoteEvent, NoteSequence, Pitch};

use crate::protocol::StreamEvent;

/// Rebuilds sink note sequences and bar tempi from a session event log and
/// writes them with the offline renderer's track layout.
///
/// Note-offs pair with the oldest sounding note of the same channel and
/// pitch.
pub fn log_to_midi(graph: &SongGraph, log: &[StreamEvent]) -> Result<Vec<u8>, RenderError> {
    let by_channel: BTreeMap<u8, String> = graph
        .sinks()
        .iter()
        .map(|n| (n.params.get("channel").and_then(|v| v.as_i64()).unwrap_or(0) as u8, n.id.clone()))
        .collect();
    let mut open: BTreeMap<(u8, u8), VecDeque<(u64, u8)>> = BTreeMap::new();
    let mut sinks: BTreeMap<String, Vec<NoteEvent>> = BTreeMap::new();
    let mut bars = Vec::new();
    for ev in log {
        match *ev {
            StreamEvent::NoteOn {
                tick,
                channel,
                pitch,
                velocity,
            } => open.entry((channel, pitch)).or_default().push_back((tick, velocity)),
            StreamEvent::NoteOff { tick, channel, pitch } => {
                let Some((start, velocity)) = open.get_mut(&(channel, pitch)).and_then(VecDeque::pop_front) else {
                    continue;
                };
                let Some(node) = by_channel.get(&channel) else { continue };
                if let Ok(n) = NoteEvent::new(Pitch::saturating(pitch as i64), start, tick - start, velocity) {
                    sinks.entry(node.clone()).or_default().push(n);
                }
            }
            StreamEvent::BarBoundary { bar, emotion, bpm, .. } => bars.push(BarInfo {
                bar_index: bar,
                emotion,
                bpm,
            }),
            StreamEvent::TransportChanged { .. } => {}
        }
    }
    let sinks: BTreeMap<String, NoteSequence> = sinks.into_iter().map(|(k, v)| (k, NoteSequence::from_events(v))).collect();
    plan_to_midi(&assemble(graph, &bars, &sinks)?)
}
