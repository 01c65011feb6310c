use crate::curves::EmotionSample;
use crate::generators::{ChordProgression, GeneratorError};
use crate::rng::{chance, rng_from_seed};
use crate::scalar::Scalar;
use crate::theory::{nearest_chord_tone, NoteEvent, NoteSequence, Pitch};

/// Semitones the inverted line is shifted by.
const SHIFT: i64 = -7;

/// Inverts `lead` around its median pitch, drops it a fifth and snaps every
/// note to the chord sounding at its onset. Each note after the first
/// survives with probability `0.5 + 0.5 * complexity`.
pub fn countermelody<S: Scalar>(
    lead: &NoteSequence,
    chords: &ChordProgression,
    emotion: &EmotionSample<S>,
    seed: u64,
) -> Result<NoteSequence, GeneratorError> {
    if lead.is_empty() {
        return Err(GeneratorError::EmptyInput("lead"));
    }
    if lead.end() > chords.span_ticks() {
        return Err(GeneratorError::SpanMismatch {
            chords: chords.span_ticks(),
            other: "lead",
            found: lead.end(),
        });
    }
    let mut pitches: Vec<i64> = lead.events().iter().map(|e| e.pitch.midi() as i64).collect();
    pitches.sort_unstable();
    let n = pitches.len();
    // twice the median keeps even-length leads in integer arithmetic
    let twice_median = pitches[(n - 1) / 2] + pitches[n / 2];

    let mut rng = rng_from_seed(seed);
    let keep = S::lit(0.5) + S::lit(0.5) * emotion.complexity;
    let mut out: Vec<NoteEvent> = Vec::with_capacity(n);
    for (i, note) in lead.events().iter().enumerate() {
        if i > 0 && !chance(&mut rng, keep) {
            continue;
        }
        let inverted = Pitch::saturating(twice_median - note.pitch.midi() as i64 + SHIFT);
        let pitch = nearest_chord_tone(inverted, chords.chord_at(note.start));
        if out.iter().any(|e| e.start == note.start && e.pitch == pitch) {
            continue;
        }
        out.push(NoteEvent { pitch, ..*note });
    }
    Ok(NoteSequence::from_events(out))
}
