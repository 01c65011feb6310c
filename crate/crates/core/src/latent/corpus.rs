use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use midly::{MidiMessage, Smf, Timing, TrackEventKind};
use thiserror::Error;

use crate::midi::{write_midi, TrackPlan};
use crate::theory::{NoteEvent, NoteSequence, Pitch, Tick, TimeSignature, PPQ};

pub const CORNER_COUNT: usize = 4;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not a readable MIDI file: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: SMPTE timing is not supported")]
    Timing { path: PathBuf },
    #[error("motif {index} is empty")]
    EmptyMotif { index: usize },
    #[error("motif {index} runs to tick {end}, past the {span}-tick bar")]
    Span { index: usize, end: Tick, span: Tick },
}

/// Four one-bar motifs at the corners `(0,0)`, `(1,0)`, `(0,1)`, `(1,1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotifCorpus {
    time_sig: TimeSignature,
    motifs: [NoteSequence; CORNER_COUNT],
}

// (sixteenth step, length in sixteenths, pitch, velocity) for a 4/4 bar
type MotifSpec = &'static [(u64, u64, u8, u8)];

const BUNDLED: [MotifSpec; CORNER_COUNT] = [
    // open arpeggio in quarters
    &[(0, 4, 72, 92), (4, 4, 76, 80), (8, 4, 79, 86), (12, 4, 76, 78)],
    // stepwise eighths with a held peak
    &[
        (0, 2, 72, 90),
        (2, 2, 74, 76),
        (4, 2, 76, 84),
        (6, 2, 77, 74),
        (8, 4, 79, 94),
        (12, 2, 77, 76),
        (14, 2, 76, 72),
    ],
    // dotted, low and dark
    &[(0, 6, 69, 88), (6, 2, 72, 70), (8, 6, 71, 84), (14, 2, 67, 68)],
    // busy sixteenth figure
    &[
        (0, 1, 79, 96),
        (1, 1, 77, 70),
        (2, 2, 76, 82),
        (4, 1, 74, 88),
        (5, 1, 76, 70),
        (6, 2, 79, 80),
        (8, 2, 84, 98),
        (10, 2, 83, 78),
        (12, 1, 81, 86),
        (13, 1, 79, 70),
        (14, 2, 76, 80),
    ],
];

impl MotifCorpus {
    pub fn new(time_sig: TimeSignature, motifs: [NoteSequence; CORNER_COUNT]) -> Result<Self, CorpusError> {
        let span = time_sig.bar_ticks(PPQ);
        for (index, m) in motifs.iter().enumerate() {
            if m.is_empty() {
                return Err(CorpusError::EmptyMotif { index });
            }
            if m.end() > span {
                return Err(CorpusError::Span { index, end: m.end(), span });
            }
        }
        Ok(MotifCorpus { time_sig, motifs })
    }

    /// Built-in motifs, stretched proportionally to one bar of `time_sig`.
    pub fn bundled(time_sig: TimeSignature) -> Self {
        let span = time_sig.bar_ticks(PPQ);
        let at = |step: u64| step * span / 16;
        let motifs = BUNDLED.map(|spec| {
            let events = spec
                .iter()
                .map(|&(step, len, pitch, vel)| {
                    let start = at(step);
                    let duration = (at(step + len) - start).max(1);
                    NoteEvent::new(Pitch::saturating(pitch as i64), start, duration, vel)
                        .expect("bundled motif notes are valid")
                })
                .collect();
            NoteSequence::from_events(events)
        });
        MotifCorpus { time_sig, motifs }
    }

    pub fn time_sig(&self) -> TimeSignature {
        self.time_sig
    }

    pub fn span(&self) -> Tick {
        self.time_sig.bar_ticks(PPQ)
    }

    pub fn motifs(&self) -> &[NoteSequence; CORNER_COUNT] {
        &self.motifs
    }

    pub fn corner_path(dir: &Path, index: usize) -> PathBuf {
        dir.join(format!("corner{index}.mid"))
    }

    /// Reads `corner0.mid` .. `corner3.mid` from `dir`.
    pub fn load_dir(dir: &Path, time_sig: TimeSignature) -> Result<Self, CorpusError> {
        let mut motifs: [NoteSequence; CORNER_COUNT] = Default::default();
        for (i, slot) in motifs.iter_mut().enumerate() {
            *slot = read_motif(&Self::corner_path(dir, i))?;
        }
        Self::new(time_sig, motifs)
    }

    /// Writes each motif as a single-track file into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), CorpusError> {
        for (i, motif) in self.motifs.iter().enumerate() {
            let path = Self::corner_path(dir, i);
            let plan = TrackPlan {
                name: format!("corner{i}"),
                channel: 0,
                program: 0,
                events: motif.clone(),
            };
            let bytes = write_midi(&[plan], &[], PPQ).expect("corpus motifs are valid tracks");
            std::fs::write(&path, bytes).map_err(|source| CorpusError::Io { path, source })?;
        }
        Ok(())
    }
}

/// Collects every note of every track, rescaling ticks to the engine PPQ.
fn read_motif(path: &Path) -> Result<NoteSequence, CorpusError> {
    let bytes = std::fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let smf = Smf::parse(&bytes).map_err(|e| CorpusError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let division = match smf.header.timing {
        Timing::Metrical(t) => t.as_int() as u64,
        Timing::Timecode(..) => return Err(CorpusError::Timing { path: path.to_path_buf() }),
    };
    let scale = |t: u64| t * PPQ as u64 / division;

    let mut events = Vec::new();
    for track in &smf.tracks {
        let mut now = 0u64;
        let mut open: BTreeMap<(u8, u8), Vec<(u64, u8)>> = BTreeMap::new();
        for ev in track {
            now += ev.delta.as_int() as u64;
            if let TrackEventKind::Midi { channel, message } = ev.kind {
                let (key, vel, on) = match message {
                    MidiMessage::NoteOn { key, vel } => (key.as_int(), vel.as_int(), vel.as_int() > 0),
                    MidiMessage::NoteOff { key, vel } => (key.as_int(), vel.as_int(), false),
                    _ => continue,
                };
                let slot = open.entry((channel.as_int(), key)).or_default();
                if on {
                    slot.push((now, vel));
                } else if !slot.is_empty() {
                    let (start, velocity) = slot.remove(0);
                    let (s, e) = (scale(start), scale(now));
                    if let Ok(n) = NoteEvent::new(Pitch::saturating(key as i64), s, (e - s).max(1), velocity) {
                        events.push(n);
                    }
                }
            }
        }
    }
    Ok(NoteSequence::from_events(events))
}
