//! Clock-free playback state machine.
//!
//! A [`Session`] schedules at most one bar ahead of the playhead. Each call
//! to [`Session::advance`] moves the playhead one bar and evaluates the bar
//! entering the lookahead window with the curves as they are at that
//! moment. Bars already scheduled never change.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use dynsong_core::curves::{song_position, CurveEdit, CurveError, CurveLabel, CurveSet};
use dynsong_core::graph::{evaluate_bar, Diagnostic, EvalError, Registry, SongGraph};
use dynsong_core::theory::{bar_to_tick, Tick, PPQ};

use crate::protocol::{StreamEvent, TransportState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("song is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Diagnostic>),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("seek to bar {bar} outside 0..={length}")]
    SeekOutOfRange { bar: u32, length: u32 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::Validation(_) => "validation",
            SessionError::Curve(e) => e.code(),
            SessionError::SeekOutOfRange { .. } => "seek_out_of_range",
            SessionError::Eval(_) => "evaluation",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    graph: Arc<SongGraph>,
    registry: Arc<Registry>,
    curves: CurveSet<f64>,
    state: TransportState,
    playhead: u32,
    horizon: Option<u32>,
    seed_override: Option<u64>,
    /// sink node id -> MIDI channel
    channels: Vec<(String, u8)>,
    /// note-offs past the end of the last scheduled bar: (tick, channel, pitch)
    pending_offs: Vec<(Tick, u8, u8)>,
    /// bpm of each bar in the lookahead window
    bpm: BTreeMap<u32, u32>,
}

impl Session {
    /// Fails with the validator's diagnostics if the graph is not playable.
    pub fn new(
        id: &str,
        graph: SongGraph,
        registry: Arc<Registry>,
        curves: CurveSet<f64>,
        seed: Option<u64>,
    ) -> Result<Self, SessionError> {
        let diags = graph.diagnostics(&registry);
        if !diags.is_empty() {
            return Err(SessionError::Validation(diags));
        }
        let mut graph = graph;
        if let Some(s) = seed {
            graph.master_seed = s;
        }
        let channels = graph
            .sinks()
            .iter()
            .map(|n| {
                let ch = n.params.get("channel").and_then(|v| v.as_i64()).unwrap_or(0);
                (n.id.clone(), ch as u8)
            })
            .collect();
        Ok(Session {
            id: id.into(),
            graph: Arc::new(graph),
            registry,
            curves,
            state: TransportState::Stopped,
            playhead: 0,
            horizon: None,
            seed_override: seed,
            channels,
            pending_offs: Vec::new(),
            bpm: BTreeMap::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn graph(&self) -> &SongGraph {
        &self.graph
    }

    pub fn curves(&self) -> &CurveSet<f64> {
        &self.curves
    }

    pub fn state(&self) -> TransportState {
        self.state
    }

    pub fn playhead_bar(&self) -> u32 {
        self.playhead
    }

    pub fn scheduled_horizon_bar(&self) -> Option<u32> {
        self.horizon
    }

    pub fn seed_override(&self) -> Option<u64> {
        self.seed_override
    }

    /// First bar a curve edit made now would reach.
    pub fn effective_bar(&self) -> u32 {
        self.horizon.map_or(self.playhead, |h| h + 1)
    }

    /// Applies an edit atomically and reports the first bar it affects.
    pub fn apply_curve_edit(&mut self, label: CurveLabel, op: &CurveEdit<f64>) -> Result<u32, SessionError> {
        self.curves = self.curves.edit(label, op)?;
        Ok(self.effective_bar())
    }

    /// Replaces all three curves; same timing rule as an edit.
    pub fn replace_curves(&mut self, curves: CurveSet<f64>) -> u32 {
        self.curves = curves;
        self.effective_bar()
    }

    /// Wall-clock length of the bar under the playhead, once scheduled.
    pub fn current_bar_seconds(&self) -> Option<f64> {
        let bpm = *self.bpm.get(&self.playhead)?;
        Some(self.graph.time_sig.quarters_per_bar() * 60.0 / bpm as f64)
    }

    pub fn play(&mut self) -> Vec<StreamEvent> {
        if self.playhead >= self.graph.length_bars() {
            return self.finish();
        }
        self.state = TransportState::Playing;
        vec![self.changed()]
    }

    pub fn pause(&mut self) -> Vec<StreamEvent> {
        if self.state == TransportState::Playing {
            self.state = TransportState::Paused;
        }
        vec![self.changed()]
    }

    pub fn stop(&mut self) -> Vec<StreamEvent> {
        self.finish()
    }

    /// Moves the playhead; the target bar is evaluated afresh on the next
    /// advance. Pending note-offs are released first.
    pub fn seek(&mut self, bar: u32) -> Result<Vec<StreamEvent>, SessionError> {
        let length = self.graph.length_bars();
        if bar > length {
            return Err(SessionError::SeekOutOfRange { bar, length });
        }
        let mut events = self.flush_offs();
        self.playhead = bar;
        self.horizon = None;
        self.bpm.clear();
        events.push(self.changed());
        Ok(events)
    }

    /// One bar of playback. Does nothing unless playing.
    pub fn advance(&mut self) -> Result<Vec<StreamEvent>, SessionError> {
        if self.state != TransportState::Playing {
            return Ok(Vec::new());
        }
        let length = self.graph.length_bars();
        let mut events = Vec::new();
        match self.horizon {
            None => {
                if self.playhead >= length {
                    return Ok(self.finish());
                }
                self.schedule(self.playhead, &mut events)?;
            }
            Some(_) => {
                self.bpm.remove(&self.playhead);
                self.playhead += 1;
                if self.playhead >= length {
                    return Ok(self.finish());
                }
            }
        }
        let next = self.playhead + 1;
        if next < length && self.horizon < Some(next) {
            self.schedule(next, &mut events)?;
        }
        Ok(events)
    }

    fn schedule(&mut self, bar: u32, events: &mut Vec<StreamEvent>) -> Result<(), SessionError> {
        let length = self.graph.length_bars();
        let emotion = self.curves.sample(song_position::<f64>(bar, length));
        let out = evaluate_bar(&self.graph, &self.registry, bar, emotion)?;
        let start = bar_to_tick(bar as u64, self.graph.time_sig, PPQ);
        let end = bar_to_tick(bar as u64 + 1, self.graph.time_sig, PPQ);

        // (tick, 0 = off / 1 = on, channel, pitch, velocity)
        let mut msgs: Vec<(Tick, u8, u8, u8, u8)> = Vec::new();
        let mut later = Vec::new();
        for (tick, ch, pitch) in self.pending_offs.drain(..) {
            if tick < end {
                msgs.push((tick, 0, ch, pitch, 0));
            } else {
                later.push((tick, ch, pitch));
            }
        }
        for (node, ch) in &self.channels {
            let Some(notes) = out.sinks.get(node) else { continue };
            for n in notes.events() {
                msgs.push((n.start, 1, *ch, n.pitch.midi(), n.velocity));
                if n.end() < end {
                    msgs.push((n.end(), 0, *ch, n.pitch.midi(), 0));
                } else {
                    later.push((n.end(), *ch, n.pitch.midi()));
                }
            }
        }
        self.pending_offs = later;
        msgs.sort();

        events.push(StreamEvent::BarBoundary {
            bar,
            tick: start,
            emotion: out.info.emotion,
            bpm: out.info.bpm,
        });
        events.extend(msgs.into_iter().map(|(tick, kind, channel, pitch, velocity)| {
            if kind == 0 {
                StreamEvent::NoteOff { tick, channel, pitch }
            } else {
                StreamEvent::NoteOn {
                    tick,
                    channel,
                    pitch,
                    velocity,
                }
            }
        }));
        self.bpm.insert(bar, out.info.bpm);
        self.horizon = Some(bar);
        Ok(())
    }

    fn flush_offs(&mut self) -> Vec<StreamEvent> {
        let mut offs = std::mem::take(&mut self.pending_offs);
        offs.sort();
        offs.into_iter()
            .map(|(tick, channel, pitch)| StreamEvent::NoteOff { tick, channel, pitch })
            .collect()
    }

    /// Releases pending notes and rewinds to bar 0, stopped.
    fn finish(&mut self) -> Vec<StreamEvent> {
        let mut events = self.flush_offs();
        self.state = TransportState::Stopped;
        self.playhead = 0;
        self.horizon = None;
        self.bpm.clear();
        events.push(self.changed());
        events
    }

    fn changed(&self) -> StreamEvent {
        StreamEvent::TransportChanged { state: self.state }
    }

    /// Plays from the current position to the end of the song and returns
    /// the whole event log, including the initial `TransportChanged`.
    pub fn play_to_end(&mut self) -> Result<Vec<StreamEvent>, SessionError> {
        let mut log = self.play();
        while self.state == TransportState::Playing {
            log.extend(self.advance()?);
        }
        Ok(log)
    }
}
