//! Deterministic stand-ins for learned melody models.
//!
//! [`latent_melody`] blends four corner motifs placed on the unit square by
//! bilinear weights; [`countermelody`] derives a chord-conforming second
//! line from a lead by inversion, transposition and thinning.

mod corpus;
mod counter;

use serde::{Deserialize, Serialize};

use crate::generators::ChordProgression;
use crate::scalar::Scalar;
use crate::theory::{nearest_chord_tone, NoteEvent, NoteSequence, Pitch};

pub use corpus::{CorpusError, MotifCorpus, CORNER_COUNT};
pub use counter::countermelody;

/// A point in the 2-D latent square, clamped to `[0, 1]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: Deserialize<'de>"))]
pub struct LatentCoord<S> {
    x: S,
    y: S,
}

impl<S: Scalar> LatentCoord<S> {
    pub fn new(x: S, y: S) -> Self {
        LatentCoord { x: x.unit(), y: y.unit() }
    }

    pub fn x(&self) -> S {
        self.x
    }

    pub fn y(&self) -> S {
        self.y
    }

    /// Bilinear weights of corners `(0,0)`, `(1,0)`, `(0,1)`, `(1,1)`.
    pub fn corner_weights(&self) -> [S; CORNER_COUNT] {
        let (x, y) = (self.x, self.y);
        let (ix, iy) = (S::one() - x, S::one() - y);
        [ix * iy, x * iy, ix * y, x * y]
    }
}

fn nearest_in_time(motif: &NoteSequence, tick: u64) -> &NoteEvent {
    motif
        .events()
        .iter()
        .min_by_key(|e| e.start.abs_diff(tick))
        .expect("corpus motifs are non-empty")
}

/// Blends the corpus at `coord`. Onsets come from the heaviest corner
/// (lowest index on ties); each pitch is the weight-averaged pitch of the
/// time-nearest note in every motif. With `chords`, pitches snap to the
/// nearest tone of the chord sounding at the onset.
pub fn latent_melody<S: Scalar>(
    corpus: &MotifCorpus,
    coord: LatentCoord<S>,
    chords: Option<&ChordProgression>,
) -> NoteSequence {
    let weights = coord.corner_weights();
    let mut lead = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > weights[lead] {
            lead = i;
        }
    }
    let events = corpus.motifs()[lead]
        .events()
        .iter()
        .map(|onset| {
            let blended = corpus
                .motifs()
                .iter()
                .zip(weights)
                .fold(S::zero(), |acc, (motif, w)| {
                    acc + w * S::lit(nearest_in_time(motif, onset.start).pitch.midi() as f64)
                });
            let mut pitch = Pitch::saturating(blended.round().to_f64_lossy() as i64);
            if let Some(chords) = chords {
                pitch = nearest_chord_tone(pitch, chords.chord_at(onset.start));
            }
            NoteEvent { pitch, ..*onset }
        })
        .collect();
    NoteSequence::from_events(events)
}
