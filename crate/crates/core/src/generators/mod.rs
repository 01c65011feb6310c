//! Procedural generators driven by an [`EmotionSample`](crate::curves::EmotionSample).
//!
//! * energy drives tempo, onset density and velocity
//! * valence selects the chord palette (darker to brighter)
//! * complexity gates chord extensions, rhythmic subdivision, syncopation
//!   and how often the melody leaves chord tones
//!
//! The thresholds (bands at 1/3 and 2/3 valence; extensions and subdivision
//! at 0.4 / 0.7 complexity) are this crate's own operationalization of the
//! three parameters.

mod melody;
mod progression;
mod rhythm;
mod tempo;

use thiserror::Error;

use crate::theory::Tick;

pub use melody::{improvise_melody, MELODY_RANGE};
pub use progression::{
    brightness, generate_progression, generate_progression_from, ChordPalette, ChordProgression,
    ChordSlot, ExtensionTier, HarmonicFunction, PaletteEntry, ValenceBand,
};
pub use rhythm::{generate_rhythm, Onset, RhythmPattern, Subdivision};
pub use tempo::tempo_map;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeneratorError {
    #[error("span mismatch: chords cover {chords} ticks but {other} covers {found}")]
    SpanMismatch {
        chords: Tick,
        other: &'static str,
        found: Tick,
    },
    #[error("{0} must not be empty")]
    EmptyInput(&'static str),
    #[error("invalid progression: {0}")]
    InvalidProgression(String),
}
