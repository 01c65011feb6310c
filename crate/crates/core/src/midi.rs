//! Standard MIDI File (format 1) writer.
//!
//! Layout: track 0 carries tempo meta events, one track per [`TrackPlan`]
//! follows. Events at the same tick are written note-offs first. Running
//! status is never used, so output is byte-stable for golden comparisons.

use thiserror::Error;

use crate::theory::{NoteSequence, Tick};

/// Largest value a variable-length quantity can hold (28 bits).
pub const VLQ_MAX: u32 = 0x0FFF_FFFF;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MidiError {
    #[error("value {0} does not fit a 28-bit variable-length quantity")]
    VlqRange(u64),
    #[error("channel {0} outside 0..=15")]
    Channel(u8),
    #[error("program {0} outside 0..=127")]
    Program(u8),
    #[error("at least one track is required")]
    NoTracks,
    #[error("tempo events must be in ascending tick order")]
    TempoOrder,
    #[error("tempo {0} bpm is not positive and finite")]
    Bpm(f64),
    #[error("ppq {0} must be in 1..=32767")]
    Division(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackPlan {
    pub name: String,
    pub channel: u8,
    pub program: u8,
    pub events: NoteSequence,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TempoEvent {
    pub tick: Tick,
    pub bpm: f64,
}

pub fn encode_vlq(value: u64) -> Result<Vec<u8>, MidiError> {
    if value > VLQ_MAX as u64 {
        return Err(MidiError::VlqRange(value));
    }
    let mut out = Vec::with_capacity(4);
    write_vlq(&mut out, value as u32);
    Ok(out)
}

fn write_vlq(buf: &mut Vec<u8>, v: u32) {
    for shift in [21u32, 14, 7] {
        if v >> shift != 0 {
            buf.push(((v >> shift) & 0x7f) as u8 | 0x80);
        }
    }
    buf.push((v & 0x7f) as u8);
}

/// Decodes one quantity from the front of `bytes`, returning it and the
/// number of bytes consumed.
pub fn decode_vlq(bytes: &[u8]) -> Option<(u32, usize)> {
    let mut v = 0u32;
    for (i, &b) in bytes.iter().take(4).enumerate() {
        v = (v << 7) | (b & 0x7f) as u32;
        if b & 0x80 == 0 {
            return Some((v, i + 1));
        }
    }
    None
}

/// Microseconds per quarter note, clamped to the 24-bit meta field.
pub fn tempo_micros(bpm: f64) -> u32 {
    (60_000_000.0 / bpm).round().clamp(1.0, 0xFF_FFFF as f64) as u32
}

struct Chunk {
    body: Vec<u8>,
    last_tick: Tick,
}

impl Chunk {
    fn new() -> Self {
        Chunk {
            body: Vec::new(),
            last_tick: 0,
        }
    }

    fn event(&mut self, tick: Tick, bytes: &[u8]) -> Result<(), MidiError> {
        let delta = tick - self.last_tick;
        if delta > VLQ_MAX as u64 {
            return Err(MidiError::VlqRange(delta));
        }
        write_vlq(&mut self.body, delta as u32);
        self.body.extend_from_slice(bytes);
        self.last_tick = tick;
        Ok(())
    }

    fn finish(mut self, out: &mut Vec<u8>) {
        self.body.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);
        out.extend_from_slice(b"MTrk");
        out.extend_from_slice(&(self.body.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.body);
    }
}

fn note_track(plan: &TrackPlan) -> Result<Chunk, MidiError> {
    let mut chunk = Chunk::new();
    if !plan.name.is_empty() {
        let name = plan.name.as_bytes();
        let mut meta = vec![0xFF, 0x03];
        write_vlq(&mut meta, name.len() as u32);
        meta.extend_from_slice(name);
        chunk.event(0, &meta)?;
    }
    if plan.events.is_empty() {
        return Ok(chunk);
    }
    let ch = plan.channel;
    chunk.event(0, &[0xC0 | ch, plan.program])?;

    // (tick, 0 = off / 1 = on, pitch, velocity)
    let mut msgs: Vec<(Tick, u8, u8, u8)> = Vec::with_capacity(plan.events.len() * 2);
    for e in plan.events.events() {
        msgs.push((e.start, 1, e.pitch.midi(), e.velocity));
        msgs.push((e.end(), 0, e.pitch.midi(), 0));
    }
    msgs.sort_by_key(|&(t, kind, pitch, _)| (t, kind, pitch));
    for (tick, kind, pitch, vel) in msgs {
        let status = if kind == 0 { 0x80 } else { 0x90 };
        chunk.event(tick, &[status | ch, pitch, vel])?;
    }
    Ok(chunk)
}

pub fn write_midi(tracks: &[TrackPlan], tempi: &[TempoEvent], ppq: u32) -> Result<Vec<u8>, MidiError> {
    if tracks.is_empty() {
        return Err(MidiError::NoTracks);
    }
    if ppq == 0 || ppq > 0x7FFF {
        return Err(MidiError::Division(ppq));
    }
    for t in tracks {
        if t.channel > 15 {
            return Err(MidiError::Channel(t.channel));
        }
        if t.program > 127 {
            return Err(MidiError::Program(t.program));
        }
    }
    if tempi.windows(2).any(|w| w[1].tick < w[0].tick) {
        return Err(MidiError::TempoOrder);
    }
    if let Some(t) = tempi.iter().find(|t| !(t.bpm.is_finite() && t.bpm > 0.0)) {
        return Err(MidiError::Bpm(t.bpm));
    }

    let mut out = Vec::new();
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&((tracks.len() + 1) as u16).to_be_bytes());
    out.extend_from_slice(&(ppq as u16).to_be_bytes());

    let mut tempo = Chunk::new();
    for t in tempi {
        let us = tempo_micros(t.bpm).to_be_bytes();
        tempo.event(t.tick, &[0xFF, 0x51, 0x03, us[1], us[2], us[3]])?;
    }
    tempo.finish(&mut out);
    for plan in tracks {
        note_track(plan)?.finish(&mut out);
    }
    Ok(out)
}
