//! Chord progressions as a weighted walk over harmonic functions.

use serde::{Deserialize, Serialize};

use super::GeneratorError;
use crate::curves::EmotionSample;
use crate::rng::{chance, rng_from_seed, weighted_index, SongRng};
use crate::scalar::Scalar;
use crate::theory::{Chord, ChordQuality, Mode, Scale, Tick, TimeSignature, PPQ};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChordSlot {
    pub chord: Chord,
    pub beats: u32,
}

/// Chords covering a whole number of bars, one slot per harmonic change.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChordProgression {
    time_sig: TimeSignature,
    slots: Vec<ChordSlot>,
}

impl ChordProgression {
    /// Slots must be non-empty with positive durations summing to whole bars.
    pub fn new(time_sig: TimeSignature, slots: Vec<ChordSlot>) -> Result<Self, GeneratorError> {
        if slots.is_empty() {
            return Err(GeneratorError::InvalidProgression("no chords".into()));
        }
        if slots.iter().any(|s| s.beats == 0) {
            return Err(GeneratorError::InvalidProgression("zero-length slot".into()));
        }
        let total: u32 = slots.iter().map(|s| s.beats).sum();
        if !total.is_multiple_of(time_sig.numerator()) {
            return Err(GeneratorError::InvalidProgression(format!(
                "{total} beats is not a whole number of {time_sig} bars"
            )));
        }
        Ok(ChordProgression { time_sig, slots })
    }

    /// Splits one bar evenly between `chords`; earlier chords take the
    /// remainder beats.
    pub fn one_bar(time_sig: TimeSignature, chords: &[Chord]) -> Result<Self, GeneratorError> {
        let n = time_sig.numerator();
        if chords.is_empty() || chords.len() as u32 > n {
            return Err(GeneratorError::InvalidProgression(format!(
                "{} chords do not fit a bar of {n} beats",
                chords.len()
            )));
        }
        let k = chords.len() as u32;
        let slots = chords
            .iter()
            .enumerate()
            .map(|(i, &chord)| ChordSlot {
                chord,
                beats: n / k + u32::from((i as u32) < n % k),
            })
            .collect();
        Self::new(time_sig, slots)
    }

    pub fn time_sig(&self) -> TimeSignature {
        self.time_sig
    }

    pub fn slots(&self) -> &[ChordSlot] {
        &self.slots
    }

    pub fn chords(&self) -> impl Iterator<Item = Chord> + '_ {
        self.slots.iter().map(|s| s.chord)
    }

    pub fn total_beats(&self) -> u32 {
        self.slots.iter().map(|s| s.beats).sum()
    }

    pub fn span_ticks(&self) -> Tick {
        self.total_beats() as Tick * self.time_sig.beat_ticks(PPQ)
    }

    /// `(start, end, chord)` tick ranges of every slot.
    pub fn slot_ranges(&self) -> Vec<(Tick, Tick, Chord)> {
        let beat = self.time_sig.beat_ticks(PPQ);
        let mut at = 0;
        self.slots
            .iter()
            .map(|s| {
                let start = at;
                at += s.beats as Tick * beat;
                (start, at, s.chord)
            })
            .collect()
    }

    /// Chord sounding at `tick`; ticks past the end see the last chord.
    pub fn chord_at(&self, tick: Tick) -> Chord {
        let beat = self.time_sig.beat_ticks(PPQ);
        let mut end = 0;
        for s in &self.slots {
            end += s.beats as Tick * beat;
            if tick < end {
                return s.chord;
            }
        }
        self.slots[self.slots.len() - 1].chord
    }
}

/// Fraction of chords with a major-family quality.
pub fn brightness(progression: &ChordProgression) -> f64 {
    let n = progression.slots.len();
    let bright = progression.chords().filter(|c| c.quality.is_bright()).count();
    bright as f64 / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HarmonicFunction {
    Tonic,
    Subdominant,
    Dominant,
}

impl HarmonicFunction {
    const ALL: [HarmonicFunction; 3] = [
        HarmonicFunction::Tonic,
        HarmonicFunction::Subdominant,
        HarmonicFunction::Dominant,
    ];

    /// Function of a 1-based scale degree.
    pub fn of_degree(degree: u8) -> Self {
        match degree {
            2 | 4 => HarmonicFunction::Subdominant,
            5 | 7 => HarmonicFunction::Dominant,
            _ => HarmonicFunction::Tonic,
        }
    }

    /// Transition weights to (tonic, subdominant, dominant).
    pub fn transitions(self) -> [f64; 3] {
        match self {
            HarmonicFunction::Tonic => [0.1, 0.5, 0.4],
            HarmonicFunction::Subdominant => [0.2, 0.2, 0.6],
            HarmonicFunction::Dominant => [0.8, 0.1, 0.1],
        }
    }

    fn step(self, rng: &mut SongRng) -> Self {
        Self::ALL[weighted_index(rng, &self.transitions())]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValenceBand {
    Low,
    Mid,
    High,
}

impl ValenceBand {
    pub fn from_valence<S: Scalar>(valence: S) -> Self {
        let v = valence.unit().to_f64_lossy();
        if v < 1.0 / 3.0 {
            ValenceBand::Low
        } else if v > 2.0 / 3.0 {
            ValenceBand::High
        } else {
            ValenceBand::Mid
        }
    }

    pub fn mode(self) -> Mode {
        match self {
            ValenceBand::Low => Mode::Aeolian,
            ValenceBand::Mid => Mode::Dorian,
            ValenceBand::High => Mode::Ionian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExtensionTier {
    Triads,
    Sevenths,
    Ninths,
}

impl ExtensionTier {
    pub fn from_complexity<S: Scalar>(complexity: S) -> Self {
        let c = complexity.unit().to_f64_lossy();
        if c < 0.4 {
            ExtensionTier::Triads
        } else if c <= 0.7 {
            ExtensionTier::Sevenths
        } else {
            ExtensionTier::Ninths
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaletteEntry {
    pub degree: u8,
    pub triad: ChordQuality,
    pub seventh: Option<ChordQuality>,
    pub ninth: Option<ChordQuality>,
    pub weight: f64,
}

impl PaletteEntry {
    const fn new(
        degree: u8,
        triad: ChordQuality,
        seventh: Option<ChordQuality>,
        ninth: Option<ChordQuality>,
        weight: f64,
    ) -> Self {
        PaletteEntry {
            degree,
            triad,
            seventh,
            ninth,
            weight,
        }
    }

    pub fn function(&self) -> HarmonicFunction {
        HarmonicFunction::of_degree(self.degree)
    }

    pub fn quality(&self, tier: ExtensionTier) -> ChordQuality {
        match tier {
            ExtensionTier::Triads => self.triad,
            ExtensionTier::Sevenths => self.seventh.unwrap_or(self.triad),
            ExtensionTier::Ninths => self.ninth.or(self.seventh).unwrap_or(self.triad),
        }
    }
}

/// The chords available to one valence band, as degrees of the band's mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChordPalette {
    pub band: ValenceBand,
    pub mode: Mode,
    pub entries: Vec<PaletteEntry>,
}

use ChordQuality::*;

const HIGH: [PaletteEntry; 4] = [
    PaletteEntry::new(1, Major, Some(Major7), Some(Major9), 1.0),
    PaletteEntry::new(4, Major, Some(Major7), Some(Major9), 1.0),
    PaletteEntry::new(5, Major, Some(Dominant7), None, 1.0),
    PaletteEntry::new(6, Minor, Some(Minor7), Some(Minor9), 0.5),
];

const MID: [PaletteEntry; 7] = [
    PaletteEntry::new(1, Minor, Some(Minor7), Some(Minor9), 1.0),
    // borrowed mixolydian tonic
    PaletteEntry::new(1, Major, Some(Dominant7), None, 0.5),
    PaletteEntry::new(3, Major, Some(Major7), Some(Major9), 0.5),
    PaletteEntry::new(2, Minor, Some(Minor7), Some(Minor9), 1.0),
    PaletteEntry::new(4, Major, Some(Dominant7), None, 1.0),
    PaletteEntry::new(5, Minor, Some(Minor7), Some(Minor9), 1.0),
    PaletteEntry::new(7, Major, Some(Major7), Some(Major9), 1.0),
];

const LOW: [PaletteEntry; 5] = [
    PaletteEntry::new(1, Minor, Some(Minor7), Some(Minor9), 1.0),
    PaletteEntry::new(4, Minor, Some(Minor7), Some(Minor9), 1.0),
    PaletteEntry::new(5, Minor, Some(Minor7), Some(Minor9), 1.0),
    PaletteEntry::new(6, Major, Some(Major7), Some(Major9), 0.5),
    PaletteEntry::new(2, Diminished, None, None, 1.0),
];

impl ChordPalette {
    /// Nominal palette of a band.
    pub fn for_band(band: ValenceBand) -> Self {
        let entries = match band {
            ValenceBand::High => HIGH.to_vec(),
            ValenceBand::Mid => MID.to_vec(),
            ValenceBand::Low => LOW.to_vec(),
        };
        ChordPalette {
            band,
            mode: band.mode(),
            entries,
        }
    }

    /// Palette for a concrete valence. In the outer bands the off-colour
    /// chord (vi in the bright band, VI in the dark band) fades from its
    /// nominal weight at the band edge to zero at the extreme.
    pub fn for_valence<S: Scalar>(valence: S) -> Self {
        let v = valence.unit().to_f64_lossy();
        let band = ValenceBand::from_valence(valence);
        let mut palette = Self::for_band(band);
        let fade = match band {
            ValenceBand::High => ((1.0 - v) * 3.0).clamp(0.0, 1.0),
            ValenceBand::Low => (v * 3.0).clamp(0.0, 1.0),
            ValenceBand::Mid => 1.0,
        };
        let off_colour = |e: &PaletteEntry| match band {
            ValenceBand::High => e.degree == 6,
            ValenceBand::Low => e.degree == 6,
            ValenceBand::Mid => false,
        };
        for e in palette.entries.iter_mut().filter(|e| off_colour(e)) {
            e.weight *= fade;
        }
        palette.entries.retain(|e| e.weight > 0.0);
        palette
    }

    pub fn entries_for(&self, function: HarmonicFunction) -> Vec<&PaletteEntry> {
        self.entries.iter().filter(|e| e.function() == function).collect()
    }

    fn draw(&self, function: HarmonicFunction, rng: &mut SongRng) -> &PaletteEntry {
        let mut options = self.entries_for(function);
        if options.is_empty() {
            options = self.entries_for(HarmonicFunction::Tonic);
        }
        let weights: Vec<f64> = options.iter().map(|e| e.weight).collect();
        options[weighted_index(rng, &weights)]
    }
}

fn realize<S: Scalar>(
    entry: &PaletteEntry,
    palette: &ChordPalette,
    key: Scale,
    complexity: S,
    rng: &mut SongRng,
) -> Chord {
    let tier = ExtensionTier::from_complexity(complexity);
    let extend = tier > ExtensionTier::Triads && chance(rng, complexity);
    let ninth = tier == ExtensionTier::Ninths && chance(rng, 0.5f64);
    let quality = match (extend, ninth) {
        (false, _) => entry.triad,
        (true, false) => entry.quality(ExtensionTier::Sevenths),
        (true, true) => entry.quality(ExtensionTier::Ninths),
    };
    let root = Scale::new(key.root, palette.mode).degree(entry.degree);
    Chord::new(root, quality)
}

/// Progression over `bars` bars starting on the tonic and resolving to a
/// tonic-function chord in the last slot. Only `key.root` is used; the mode
/// comes from the valence band.
pub fn generate_progression<S: Scalar>(
    emotion: &EmotionSample<S>,
    key: Scale,
    bars: u32,
    time_sig: TimeSignature,
    seed: u64,
) -> ChordProgression {
    generate_progression_from(emotion, key, bars, time_sig, HarmonicFunction::Tonic, true, seed)
}

/// Like [`generate_progression`] with an explicit starting function and an
/// optional final resolution.
pub fn generate_progression_from<S: Scalar>(
    emotion: &EmotionSample<S>,
    key: Scale,
    bars: u32,
    time_sig: TimeSignature,
    start: HarmonicFunction,
    resolve: bool,
    seed: u64,
) -> ChordProgression {
    let mut rng = rng_from_seed(seed);
    let palette = ChordPalette::for_valence(emotion.valence);
    let bars = bars.max(1);
    let beats = time_sig.numerator();
    let per_bar = if emotion.complexity.to_f64_lossy() < 0.5 || beats < 2 {
        1
    } else {
        2
    };
    let split = [beats - beats / 2, beats / 2];
    let total = (bars * per_bar) as usize;

    let mut slots = Vec::with_capacity(total);
    let mut function = start;
    for i in 0..total {
        if i > 0 {
            function = function.step(&mut rng);
        }
        if resolve && i + 1 == total {
            function = HarmonicFunction::Tonic;
        }
        let entry = *palette.draw(function, &mut rng);
        let chord = realize(&entry, &palette, key, emotion.complexity, &mut rng);
        let beats = if per_bar == 1 { beats } else { split[i % 2] };
        slots.push(ChordSlot { chord, beats });
    }
    ChordProgression { time_sig, slots }
}
