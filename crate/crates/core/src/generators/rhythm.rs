//! One-bar onset patterns.

use serde::{Deserialize, Serialize};

use crate::curves::EmotionSample;
use crate::rng::{chance, rng_from_seed};
use crate::scalar::Scalar;
use crate::theory::{Tick, TimeSignature, PPQ};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subdivision {
    Quarter,
    Eighth,
    Sixteenth,
}

impl Subdivision {
    pub fn from_complexity<S: Scalar>(complexity: S) -> Self {
        let c = complexity.unit().to_f64_lossy();
        if c < 0.4 {
            Subdivision::Quarter
        } else if c <= 0.7 {
            Subdivision::Eighth
        } else {
            Subdivision::Sixteenth
        }
    }

    pub fn ticks(self) -> Tick {
        match self {
            Subdivision::Quarter => PPQ as Tick,
            Subdivision::Eighth => PPQ as Tick / 2,
            Subdivision::Sixteenth => PPQ as Tick / 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Onset {
    pub position: Tick,
    pub duration: Tick,
    pub accent: f64,
    /// Pushed half a cell off the base grid.
    pub syncopated: bool,
}

/// Onsets within one bar, strictly ascending by position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhythmPattern {
    span: Tick,
    grid: Subdivision,
    onsets: Vec<Onset>,
}

impl RhythmPattern {
    /// One unsyncopated onset per beat with full accent.
    pub fn on_beats(time_sig: TimeSignature) -> Self {
        let beat = time_sig.beat_ticks(PPQ);
        let onsets = (0..time_sig.numerator() as Tick)
            .map(|i| Onset {
                position: i * beat,
                duration: beat,
                accent: 1.0,
                syncopated: false,
            })
            .collect();
        RhythmPattern {
            span: time_sig.bar_ticks(PPQ),
            grid: Subdivision::Quarter,
            onsets,
        }
    }

    pub fn span(&self) -> Tick {
        self.span
    }

    pub fn grid(&self) -> Subdivision {
        self.grid
    }

    pub fn onsets(&self) -> &[Onset] {
        &self.onsets
    }

    pub fn len(&self) -> usize {
        self.onsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.onsets.is_empty()
    }
}

fn accent_for(position: Tick, beat: Tick, syncopated: bool) -> f64 {
    if position == 0 {
        1.0
    } else if syncopated {
        0.7
    } else if position.is_multiple_of(beat) {
        0.8
    } else {
        0.6
    }
}

/// Draws one bar of onsets. Each grid cell sounds with probability
/// `0.3 + 0.6 * energy` and is pushed half a cell late with probability
/// `0.4 * complexity`. A bar that draws nothing gets its downbeat.
pub fn generate_rhythm<S: Scalar>(emotion: &EmotionSample<S>, time_sig: TimeSignature, seed: u64) -> RhythmPattern {
    let mut rng = rng_from_seed(seed);
    let span = time_sig.bar_ticks(PPQ);
    let beat = time_sig.beat_ticks(PPQ);
    let grid = Subdivision::from_complexity(emotion.complexity);
    let cell = grid.ticks().min(span);
    let cells = (span / cell).max(1);
    let p_onset = S::lit(0.3) + S::lit(0.6) * emotion.energy;
    let p_sync = S::lit(0.4) * emotion.complexity;

    let mut onsets = Vec::new();
    for i in 0..cells {
        if !chance(&mut rng, p_onset) {
            continue;
        }
        let syncopated = chance(&mut rng, p_sync);
        let (position, duration) = if syncopated {
            (i * cell + cell / 2, cell - cell / 2)
        } else {
            (i * cell, cell)
        };
        onsets.push(Onset {
            position,
            duration,
            accent: accent_for(position, beat, syncopated),
            syncopated,
        });
    }
    if onsets.is_empty() {
        onsets.push(Onset {
            position: 0,
            duration: cell,
            accent: 1.0,
            syncopated: false,
        });
    }
    RhythmPattern { span, grid, onsets }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn emo(e: f64, c: f64) -> EmotionSample<f64> {
        EmotionSample::new(e, 0.5, c)
    }

    /// Exact expected onset count: every cell independently sounds with
    /// probability p, plus the forced downbeat when all cells are silent.
    fn expected_onsets(cells: i32, p: f64) -> f64 {
        let mut total = 0.0;
        for mask in 0..(1u32 << cells) {
            let k = mask.count_ones() as i32;
            let prob = p.powi(k) * (1.0 - p).powi(cells - k);
            total += prob * if k == 0 { 1.0 } else { k as f64 };
        }
        total
    }

    #[test]
    fn high_energy_fills_about_ninety_percent_of_quarters() {
        let ts = TimeSignature::COMMON;
        let mut hits = 0usize;
        for seed in 0..1000 {
            let r = generate_rhythm(&emo(1.0, 0.0), ts, seed);
            assert_eq!(r.grid(), Subdivision::Quarter);
            assert!(r.onsets().iter().all(|o| !o.syncopated && o.position % 480 == 0));
            hits += r.len();
        }
        let rate = hits as f64 / 4000.0;
        assert!((rate - 0.9).abs() <= 0.05, "{rate}");
    }

    #[test]
    fn low_energy_mean_matches_enumeration_and_is_never_empty() {
        let ts = TimeSignature::COMMON;
        let oracle = expected_onsets(4, 0.3);
        assert!((oracle - 1.4401).abs() < 1e-12);
        let mut total = 0usize;
        for seed in 0..1000 {
            let r = generate_rhythm(&emo(0.0, 0.0), ts, seed);
            assert!(!r.is_empty());
            total += r.len();
        }
        let mean = total as f64 / 1000.0;
        assert!((mean - oracle).abs() <= 0.1, "{mean} vs {oracle}");
    }

    #[test]
    fn same_seed_same_pattern() {
        let ts = TimeSignature::new(7, 8).unwrap();
        let e = emo(0.63, 0.81);
        assert_eq!(generate_rhythm(&e, ts, 99), generate_rhythm(&e, ts, 99));
    }

    #[test]
    fn subdivision_thresholds() {
        assert_eq!(Subdivision::from_complexity(0.3f64), Subdivision::Quarter);
        assert_eq!(Subdivision::from_complexity(0.4f64), Subdivision::Eighth);
        assert_eq!(Subdivision::from_complexity(0.7f64), Subdivision::Eighth);
        assert_eq!(Subdivision::from_complexity(0.75f64), Subdivision::Sixteenth);
    }

    #[test]
    fn short_bar_still_gets_a_cell() {
        let ts = TimeSignature::new(1, 16).unwrap();
        let r = generate_rhythm(&emo(0.0, 0.0), ts, 3);
        assert_eq!(r.span(), 120);
        assert_eq!(r.onsets()[0].duration, 120);
    }

    #[test]
    fn on_beats_covers_bar() {
        let r = RhythmPattern::on_beats(TimeSignature::new(6, 8).unwrap());
        assert_eq!(r.len(), 6);
        assert_eq!(r.onsets()[5].position, 5 * 240);
        assert_eq!(r.span(), 1440);
    }

    proptest! {
        #[test]
        fn patterns_are_sorted_and_in_bar(e in 0.0f64..=1.0, c in 0.0f64..=1.0, num in 1u32..13, den in 0usize..5, seed: u64) {
            let ts = TimeSignature::new(num, [1, 2, 4, 8, 16][den]).unwrap();
            let r = generate_rhythm(&emo(e, c), ts, seed);
            prop_assert!(!r.is_empty());
            prop_assert!(r.onsets().windows(2).all(|w| w[0].position < w[1].position));
            prop_assert!(r.onsets().iter().all(|o| o.duration > 0 && o.position + o.duration <= r.span()));
            prop_assert!(r.onsets().iter().all(|o| (0.0..=1.0).contains(&o.accent)));
        }
    }
}
