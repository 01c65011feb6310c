//! Music-theory primitives and tick arithmetic.
//!
//! Everything here is a plain value type. Time is measured in ticks at
//! [`PPQ`] pulses per quarter note.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Engine-wide tick resolution (pulses per quarter note).
pub const PPQ: u32 = 480;

/// Absolute or bar-relative time in ticks.
pub type Tick = u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TheoryError {
    #[error("pitch {0} is outside the MIDI range 0..=127")]
    PitchOutOfRange(i64),
    #[error("octave {0} is outside 0..=8")]
    OctaveOutOfRange(i32),
    #[error("invalid time signature {numerator}/{denominator}")]
    InvalidTimeSignature { numerator: u32, denominator: u32 },
    #[error("invalid note: {0}")]
    InvalidNote(String),
    #[error("cannot parse chord symbol `{0}`")]
    BadChordSymbol(String),
}

/// Semitone class, 0 = C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "i64", into = "u8")]
pub struct PitchClass(u8);

impl PitchClass {
    pub const C: PitchClass = PitchClass(0);

    pub fn new(value: i64) -> Self {
        PitchClass(value.rem_euclid(12) as u8)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn transpose(self, semitones: i64) -> Self {
        Self::new(self.0 as i64 + semitones)
    }
}

impl From<i64> for PitchClass {
    fn from(v: i64) -> Self {
        PitchClass::new(v)
    }
}

impl From<PitchClass> for u8 {
    fn from(pc: PitchClass) -> u8 {
        pc.0
    }
}

const SHARP_NAMES: [&str; 12] = [
    "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B",
];

impl fmt::Display for PitchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(SHARP_NAMES[self.0 as usize])
    }
}

impl FromStr for PitchClass {
    type Err = TheoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.chars();
        let base = match chars.next().map(|c| c.to_ascii_uppercase()) {
            Some('C') => 0,
            Some('D') => 2,
            Some('E') => 4,
            Some('F') => 5,
            Some('G') => 7,
            Some('A') => 9,
            Some('B') => 11,
            _ => return Err(TheoryError::BadChordSymbol(s.to_string())),
        };
        let mut offset = 0i64;
        for c in chars {
            match c {
                '#' => offset += 1,
                'b' => offset -= 1,
                _ => return Err(TheoryError::BadChordSymbol(s.to_string())),
            }
        }
        Ok(PitchClass::new(base + offset))
    }
}

/// A MIDI note number in `0..=127`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct Pitch(u8);

impl Pitch {
    pub const MAX: u8 = 127;

    pub fn new(midi_number: i64) -> Result<Self, TheoryError> {
        if (0..=Self::MAX as i64).contains(&midi_number) {
            Ok(Pitch(midi_number as u8))
        } else {
            Err(TheoryError::PitchOutOfRange(midi_number))
        }
    }

    /// Clamps into the MIDI range.
    pub fn saturating(midi_number: i64) -> Self {
        Pitch(midi_number.clamp(0, Self::MAX as i64) as u8)
    }

    pub fn midi(self) -> u8 {
        self.0
    }

    pub fn pitch_class(self) -> PitchClass {
        PitchClass::new(self.0 as i64)
    }
}

impl TryFrom<i64> for Pitch {
    type Error = TheoryError;
    fn try_from(v: i64) -> Result<Self, Self::Error> {
        Pitch::new(v)
    }
}

impl From<Pitch> for u8 {
    fn from(p: Pitch) -> u8 {
        p.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChordQuality {
    Major,
    Minor,
    Diminished,
    Augmented,
    Dominant7,
    Major7,
    Minor7,
    Major9,
    Minor9,
}

impl ChordQuality {
    pub const ALL: [ChordQuality; 9] = [
        ChordQuality::Major,
        ChordQuality::Minor,
        ChordQuality::Diminished,
        ChordQuality::Augmented,
        ChordQuality::Dominant7,
        ChordQuality::Major7,
        ChordQuality::Minor7,
        ChordQuality::Major9,
        ChordQuality::Minor9,
    ];

    /// Semitone offsets above the root, root position.
    pub fn template(self) -> &'static [u8] {
        match self {
            ChordQuality::Major => &[0, 4, 7],
            ChordQuality::Minor => &[0, 3, 7],
            ChordQuality::Diminished => &[0, 3, 6],
            ChordQuality::Augmented => &[0, 4, 8],
            ChordQuality::Dominant7 => &[0, 4, 7, 10],
            ChordQuality::Major7 => &[0, 4, 7, 11],
            ChordQuality::Minor7 => &[0, 3, 7, 10],
            ChordQuality::Major9 => &[0, 4, 7, 11, 14],
            ChordQuality::Minor9 => &[0, 3, 7, 10, 14],
        }
    }

    pub fn is_seventh(self) -> bool {
        matches!(
            self,
            ChordQuality::Dominant7 | ChordQuality::Major7 | ChordQuality::Minor7
        )
    }

    pub fn is_ninth(self) -> bool {
        matches!(self, ChordQuality::Major9 | ChordQuality::Minor9)
    }

    pub fn is_triad(self) -> bool {
        self.template().len() == 3
    }

    /// Major-family qualities, used as the brightness measure of a progression.
    pub fn is_bright(self) -> bool {
        matches!(
            self,
            ChordQuality::Major
                | ChordQuality::Major7
                | ChordQuality::Major9
                | ChordQuality::Dominant7
        )
    }

    pub fn symbol(self) -> &'static str {
        match self {
            ChordQuality::Major => "maj",
            ChordQuality::Minor => "min",
            ChordQuality::Diminished => "dim",
            ChordQuality::Augmented => "aug",
            ChordQuality::Dominant7 => "7",
            ChordQuality::Major7 => "maj7",
            ChordQuality::Minor7 => "min7",
            ChordQuality::Major9 => "maj9",
            ChordQuality::Minor9 => "min9",
        }
    }
}

impl FromStr for ChordQuality {
    type Err = TheoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ChordQuality::ALL
            .into_iter()
            .find(|q| q.symbol() == s)
            .ok_or_else(|| TheoryError::BadChordSymbol(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Chord {
    pub root: PitchClass,
    pub quality: ChordQuality,
}

impl Chord {
    pub fn new(root: PitchClass, quality: ChordQuality) -> Self {
        Chord { root, quality }
    }

    pub fn pitch_classes(&self) -> BTreeSet<PitchClass> {
        self.quality
            .template()
            .iter()
            .map(|&i| self.root.transpose(i as i64))
            .collect()
    }

    pub fn contains(&self, pc: PitchClass) -> bool {
        self.quality
            .template()
            .iter()
            .any(|&i| self.root.transpose(i as i64) == pc)
    }
}

impl fmt::Display for Chord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.root, self.quality.symbol())
    }
}

/// Parses symbols of the form `Root:quality`, e.g. `C:maj`, `F#:min7`.
/// A bare root means a major triad.
impl FromStr for Chord {
    type Err = TheoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (root, quality) = match s.split_once(':') {
            Some((r, q)) => (r, q.parse()?),
            None => (s, ChordQuality::Major),
        };
        let root = root
            .parse()
            .map_err(|_| TheoryError::BadChordSymbol(s.to_string()))?;
        Ok(Chord::new(root, quality))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Ionian,
    Dorian,
    Phrygian,
    Lydian,
    Mixolydian,
    Aeolian,
    Locrian,
}

impl Mode {
    pub const ALL: [Mode; 7] = [
        Mode::Ionian,
        Mode::Dorian,
        Mode::Phrygian,
        Mode::Lydian,
        Mode::Mixolydian,
        Mode::Aeolian,
        Mode::Locrian,
    ];

    pub fn intervals(self) -> [u8; 7] {
        const IONIAN: [u8; 7] = [0, 2, 4, 5, 7, 9, 11];
        // Each mode is a rotation of the major scale.
        let shift = match self {
            Mode::Ionian => 0,
            Mode::Dorian => 1,
            Mode::Phrygian => 2,
            Mode::Lydian => 3,
            Mode::Mixolydian => 4,
            Mode::Aeolian => 5,
            Mode::Locrian => 6,
        };
        let base = IONIAN[shift];
        let mut out = [0u8; 7];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = (IONIAN[(i + shift) % 7] + 12 - base) % 12;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scale {
    pub root: PitchClass,
    pub mode: Mode,
}

impl Scale {
    pub fn new(root: PitchClass, mode: Mode) -> Self {
        Scale { root, mode }
    }

    /// Pitch class of a 1-based scale degree; degrees wrap past 7.
    pub fn degree(&self, degree: u8) -> PitchClass {
        let idx = (degree.max(1) as usize - 1) % 7;
        self.root.transpose(self.mode.intervals()[idx] as i64)
    }

    pub fn contains(&self, pc: PitchClass) -> bool {
        self.mode
            .intervals()
            .iter()
            .any(|&i| self.root.transpose(i as i64) == pc)
    }

    /// All in-scale MIDI pitches within `lo..=hi`, ascending.
    pub fn pitches_in(&self, lo: u8, hi: u8) -> Vec<Pitch> {
        (lo..=hi)
            .map(Pitch)
            .filter(|p| self.contains(p.pitch_class()))
            .collect()
    }
}

pub fn scale_pitch_classes(scale: Scale) -> BTreeSet<PitchClass> {
    scale
        .mode
        .intervals()
        .iter()
        .map(|&i| scale.root.transpose(i as i64))
        .collect()
}

/// Root-position pitches of `chord` with the root in `octave`
/// (octave 4 puts C at MIDI 60).
pub fn chord_pitches(chord: Chord, octave: i32) -> Result<Vec<Pitch>, TheoryError> {
    if !(0..=8).contains(&octave) {
        return Err(TheoryError::OctaveOutOfRange(octave));
    }
    let root = (octave as i64 + 1) * 12 + chord.root.value() as i64;
    chord
        .quality
        .template()
        .iter()
        .map(|&i| Pitch::new(root + i as i64))
        .collect()
}

/// Closest pitch whose class belongs to `chord`; equal distances resolve
/// to the lower pitch.
pub fn nearest_chord_tone(pitch: Pitch, chord: Chord) -> Pitch {
    let p = pitch.midi() as i64;
    for d in 0..=Pitch::MAX as i64 {
        for candidate in [p - d, p + d] {
            if let Ok(c) = Pitch::new(candidate) {
                if chord.contains(c.pitch_class()) {
                    return c;
                }
            }
        }
    }
    // every chord has at least one pitch class, and each class occurs in 0..=11
    unreachable!("chord has no pitch classes")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "TimeSignatureRepr", into = "TimeSignatureRepr")]
pub struct TimeSignature {
    numerator: u32,
    denominator: u32,
}

#[derive(Serialize, Deserialize)]
struct TimeSignatureRepr {
    numerator: u32,
    denominator: u32,
}

impl TryFrom<TimeSignatureRepr> for TimeSignature {
    type Error = TheoryError;
    fn try_from(r: TimeSignatureRepr) -> Result<Self, Self::Error> {
        TimeSignature::new(r.numerator, r.denominator)
    }
}

impl From<TimeSignature> for TimeSignatureRepr {
    fn from(t: TimeSignature) -> Self {
        TimeSignatureRepr {
            numerator: t.numerator,
            denominator: t.denominator,
        }
    }
}

impl TimeSignature {
    pub const COMMON: TimeSignature = TimeSignature {
        numerator: 4,
        denominator: 4,
    };

    pub fn new(numerator: u32, denominator: u32) -> Result<Self, TheoryError> {
        if numerator == 0 || !matches!(denominator, 1 | 2 | 4 | 8 | 16) {
            return Err(TheoryError::InvalidTimeSignature {
                numerator,
                denominator,
            });
        }
        Ok(TimeSignature {
            numerator,
            denominator,
        })
    }

    pub fn numerator(&self) -> u32 {
        self.numerator
    }

    pub fn denominator(&self) -> u32 {
        self.denominator
    }

    pub fn beat_ticks(&self, ppq: u32) -> Tick {
        (ppq as Tick * 4) / self.denominator as Tick
    }

    pub fn bar_ticks(&self, ppq: u32) -> Tick {
        self.numerator as Tick * self.beat_ticks(ppq)
    }

    /// Length of one bar measured in quarter notes.
    pub fn quarters_per_bar(&self) -> f64 {
        self.numerator as f64 * 4.0 / self.denominator as f64
    }
}

impl fmt::Display for TimeSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

pub fn bar_to_tick(bar: u64, time_sig: TimeSignature, ppq: u32) -> Tick {
    bar * time_sig.bar_ticks(ppq)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NoteEvent {
    pub start: Tick,
    pub pitch: Pitch,
    pub duration: Tick,
    pub velocity: u8,
}

impl NoteEvent {
    pub fn new(pitch: Pitch, start: Tick, duration: Tick, velocity: u8) -> Result<Self, TheoryError> {
        if duration == 0 {
            return Err(TheoryError::InvalidNote("duration must be at least one tick".into()));
        }
        if !(1..=127).contains(&velocity) {
            return Err(TheoryError::InvalidNote(format!("velocity {velocity} outside 1..=127")));
        }
        start
            .checked_add(duration)
            .ok_or_else(|| TheoryError::InvalidNote("end tick overflows".into()))?;
        Ok(NoteEvent {
            start,
            pitch,
            duration,
            velocity,
        })
    }

    pub fn end(&self) -> Tick {
        self.start + self.duration
    }
}

/// Note events kept sorted by `(start, pitch)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<NoteEvent>", into = "Vec<NoteEvent>")]
pub struct NoteSequence {
    events: Vec<NoteEvent>,
}

impl NoteSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_events(mut events: Vec<NoteEvent>) -> Self {
        events.sort();
        NoteSequence { events }
    }

    pub fn events(&self) -> &[NoteEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<NoteEvent> {
        self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn push(&mut self, event: NoteEvent) {
        let at = self.events.partition_point(|e| e <= &event);
        self.events.insert(at, event);
    }

    pub fn extend(&mut self, other: NoteSequence) {
        self.events.extend(other.events);
        self.events.sort();
    }

    /// Shifts every event later by `ticks`.
    pub fn offset(mut self, ticks: Tick) -> Self {
        for e in &mut self.events {
            e.start += ticks;
        }
        self
    }

    /// Tick just past the last sounding note, or 0 when empty.
    pub fn end(&self) -> Tick {
        self.events.iter().map(NoteEvent::end).max().unwrap_or(0)
    }

    pub fn within(&self, start: Tick, end: Tick) -> bool {
        self.events.iter().all(|e| e.start >= start && e.end() <= end)
    }
}

impl From<Vec<NoteEvent>> for NoteSequence {
    fn from(events: Vec<NoteEvent>) -> Self {
        NoteSequence::from_events(events)
    }
}

impl From<NoteSequence> for Vec<NoteEvent> {
    fn from(seq: NoteSequence) -> Self {
        seq.events
    }
}
