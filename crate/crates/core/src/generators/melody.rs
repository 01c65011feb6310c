use std::ops::RangeInclusive;

use rand::Rng;

use super::{ChordProgression, GeneratorError, RhythmPattern};
use crate::curves::EmotionSample;
use crate::rng::{chance, rng_from_seed};
use crate::scalar::Scalar;
use crate::theory::{Chord, NoteEvent, NoteSequence, Pitch, Scale};

/// Two octaves centred on C5 (MIDI 72).
pub const MELODY_RANGE: RangeInclusive<u8> = 60..=84;

const CENTER: u8 = 72;
/// Chord tones farther than this from the previous note are only used when
/// nothing closer exists.
const LEAP_LIMIT: i32 = 7;

fn chord_tones_in_range(chord: Chord) -> Vec<u8> {
    MELODY_RANGE
        .filter(|&p| chord.contains(Pitch::saturating(p as i64).pitch_class()))
        .collect()
}

fn pick_chord_tone(chord: Chord, prev: u8, rng: &mut impl Rng) -> u8 {
    let all = chord_tones_in_range(chord);
    let near: Vec<u8> = all
        .iter()
        .copied()
        .filter(|&p| (p as i32 - prev as i32).abs() <= LEAP_LIMIT)
        .collect();
    let pool = if near.is_empty() { &all } else { &near };
    pool[rng.gen_range(0..pool.len())]
}

fn step_in_scale(scale: Scale, prev: u8, rng: &mut impl Rng) -> u8 {
    let ladder = scale.pitches_in(*MELODY_RANGE.start(), *MELODY_RANGE.end());
    // nearest scale position to the previous note, lower one on ties
    let at = ladder
        .iter()
        .enumerate()
        .min_by_key(|(_, p)| ((p.midi() as i32 - prev as i32).abs(), p.midi()))
        .map(|(i, _)| i as i64)
        .unwrap_or(0);
    let step = [-2i64, -1, 1, 2][rng.gen_range(0..4)];
    let last = ladder.len() as i64 - 1;
    let mut target = at + step;
    if !(0..=last).contains(&target) {
        target = at - step;
    }
    ladder[target.clamp(0, last) as usize].midi()
}

/// One note per rhythm onset over `chords`. Notes are chord tones with
/// probability `1 - 0.5 * complexity`, otherwise stepwise scale tones within
/// two scale steps of the previous note.
pub fn improvise_melody<S: Scalar>(
    chords: &ChordProgression,
    rhythm: &RhythmPattern,
    emotion: &EmotionSample<S>,
    key: Scale,
    seed: u64,
) -> Result<NoteSequence, GeneratorError> {
    if chords.span_ticks() != rhythm.span() {
        return Err(GeneratorError::SpanMismatch {
            chords: chords.span_ticks(),
            other: "rhythm",
            found: rhythm.span(),
        });
    }
    let mut rng = rng_from_seed(seed);
    let p_chord = S::one() - S::lit(0.5) * emotion.complexity;
    let energy = emotion.energy.to_f64_lossy();

    let mut prev = CENTER;
    let mut events = Vec::with_capacity(rhythm.len());
    for onset in rhythm.onsets() {
        let chord = chords.chord_at(onset.position);
        let pitch = if chance(&mut rng, p_chord) {
            pick_chord_tone(chord, prev, &mut rng)
        } else {
            step_in_scale(key, prev, &mut rng)
        };
        let velocity = (48.0 + 64.0 * energy * onset.accent).round().clamp(1.0, 127.0) as u8;
        let event = NoteEvent::new(Pitch::saturating(pitch as i64), onset.position, onset.duration, velocity)
            .expect("onsets have positive duration");
        events.push(event);
        prev = pitch;
    }
    Ok(NoteSequence::from_events(events))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{generate_progression, generate_rhythm, Onset};
    use crate::theory::{Mode, PitchClass, TimeSignature};
    use proptest::prelude::*;

    const KEY: Scale = Scale {
        root: PitchClass::C,
        mode: Mode::Ionian,
    };

    #[test]
    fn zero_complexity_plays_only_chord_tones() {
        let ts = TimeSignature::COMMON;
        for seed in 0..1000u64 {
            let e = EmotionSample::new(0.7, (seed % 10) as f64 / 10.0, 0.0);
            let chords = generate_progression(&e, KEY, 1, ts, seed);
            let rhythm = generate_rhythm(&e, ts, seed ^ 0xabc);
            let mel = improvise_melody(&chords, &rhythm, &e, KEY, seed).unwrap();
            assert_eq!(mel.len(), rhythm.len());
            for n in mel.events() {
                assert!(chords.chord_at(n.start).contains(n.pitch.pitch_class()));
            }
        }
    }

    #[test]
    fn velocity_formula_endpoint() {
        let ts = TimeSignature::COMMON;
        let chords = ChordProgression::one_bar(ts, &["C".parse().unwrap()]).unwrap();
        let rhythm = RhythmPattern::on_beats(ts);
        assert!(rhythm.onsets().iter().all(|o: &Onset| o.accent == 1.0));
        let quiet = improvise_melody(&chords, &rhythm, &EmotionSample::new(0.0, 0.5, 0.3), KEY, 1).unwrap();
        assert!(quiet.events().iter().all(|n| n.velocity == 48));
        let loud = improvise_melody(&chords, &rhythm, &EmotionSample::new(1.0, 0.5, 0.3), KEY, 1).unwrap();
        assert!(loud.events().iter().all(|n| n.velocity == 112));
    }

    #[test]
    fn span_mismatch_is_rejected() {
        let chords = ChordProgression::one_bar(TimeSignature::COMMON, &["C".parse().unwrap()]).unwrap();
        let rhythm = RhythmPattern::on_beats(TimeSignature::new(3, 4).unwrap());
        let err = improvise_melody(&chords, &rhythm, &EmotionSample::uniform(0.5), KEY, 0).unwrap_err();
        assert_eq!(
            err,
            GeneratorError::SpanMismatch { chords: 1920, other: "rhythm", found: 1440 }
        );
    }

    proptest! {
        #[test]
        fn melody_stays_in_range_and_sorted(e in 0.0f64..=1.0, v in 0.0f64..=1.0, c in 0.0f64..=1.0, root in 0i64..12, seed: u64) {
            let ts = TimeSignature::COMMON;
            let em = EmotionSample::new(e, v, c);
            let key = Scale::new(PitchClass::new(root), Mode::Dorian);
            let chords = generate_progression(&em, key, 1, ts, seed);
            let rhythm = generate_rhythm(&em, ts, seed.wrapping_add(1));
            let mel = improvise_melody(&chords, &rhythm, &em, key, seed).unwrap();
            prop_assert_eq!(mel.len(), rhythm.len());
            prop_assert!(mel.events().iter().all(|n| MELODY_RANGE.contains(&n.pitch.midi())));
            prop_assert!(mel.events().windows(2).all(|w| (w[0].start, w[0].pitch) <= (w[1].start, w[1].pitch)));
            prop_assert!(mel.within(0, 1920));
            prop_assert_eq!(mel, improvise_melody(&chords, &rhythm, &em, key, seed).unwrap());
        }
    }
}
