//! Built-in block kinds.
//!
//! Emotional `Param` inputs (`energy`, `valence`, `complexity`) fall back to
//! the node parameter of the same name when unconnected; wire them from a
//! `curve_source` to follow the song curves.

use std::path::Path;
use std::sync::Arc;

use crate::curves::EmotionSample;
use crate::generators::{
    generate_progression_from, generate_rhythm, improvise_melody, tempo_map, ChordProgression, HarmonicFunction,
    RhythmPattern, ValenceBand,
};
use crate::graph::{
    Block, BlockDescriptor, BlockError, BlockInputs, BlockOutputs, BlockRole, EvalContext, InputDefault, ParamSpec,
    ParamValues, PortSpec, PortType, PortValue, Registry,
};
use crate::latent::{countermelody, latent_melody, LatentCoord, MotifCorpus};
use crate::theory::{Chord, PitchClass, Scale};

/// Bars per phrase for `progression_generator`.
pub const PHRASE_BARS: u32 = 4;

/// Harmonic function opening each bar of a phrase.
const PHRASE_PLAN: [HarmonicFunction; PHRASE_BARS as usize] = [
    HarmonicFunction::Tonic,
    HarmonicFunction::Subdominant,
    HarmonicFunction::Dominant,
    HarmonicFunction::Tonic,
];

type EvalFn = fn(&BlockInputs, &ParamValues, &EvalContext) -> Result<BlockOutputs, BlockError>;
type CheckFn = fn(&ParamValues) -> Vec<(String, String)>;

struct FnBlock {
    descriptor: BlockDescriptor,
    eval: EvalFn,
    check: CheckFn,
}

impl Block for FnBlock {
    fn descriptor(&self) -> &BlockDescriptor {
        &self.descriptor
    }

    fn evaluate(&self, inputs: &BlockInputs, params: &ParamValues, ctx: &EvalContext) -> Result<BlockOutputs, BlockError> {
        (self.eval)(inputs, params, ctx)
    }

    fn check_params(&self, params: &ParamValues) -> Vec<(String, String)> {
        (self.check)(params)
    }
}

fn no_check(_: &ParamValues) -> Vec<(String, String)> {
    Vec::new()
}

fn emotion_input(name: &str) -> PortSpec {
    PortSpec::input(name, PortType::Param, InputDefault::FromParam { param: name.into() })
}

fn emotion_param(name: &str) -> ParamSpec {
    ParamSpec::number(name, 0.0, 1.0, 0.5).with_doc("used while the input of the same name is unconnected")
}

fn key_param() -> ParamSpec {
    ParamSpec::integer("key_root", 0, 11, 0).with_doc("pitch class of the tonic, 0 = C")
}

fn desc(kind: &str, doc: &str, role: BlockRole, inputs: Vec<PortSpec>, outputs: Vec<PortSpec>, params: Vec<ParamSpec>) -> BlockDescriptor {
    BlockDescriptor {
        kind: kind.into(),
        doc: doc.into(),
        role,
        inputs,
        outputs,
        params,
    }
}

fn out(pairs: impl IntoIterator<Item = (&'static str, PortValue)>) -> BlockOutputs {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn text<'a>(params: &'a ParamValues, name: &str) -> &'a str {
    params.get(name).and_then(|v| v.as_str()).unwrap_or("")
}

fn int(params: &ParamValues, name: &str) -> i64 {
    params.get(name).and_then(|v| v.as_i64()).unwrap_or(0)
}

/// Emotion assembled from the three emotional inputs; missing ones come
/// from the bar's curve sample.
fn emotion_from(inputs: &BlockInputs, ctx: &EvalContext) -> Result<EmotionSample<f64>, BlockError> {
    let e = ctx.emotion;
    Ok(EmotionSample::new(
        inputs.param("energy")?.unwrap_or(e.energy),
        inputs.param("valence")?.unwrap_or(e.valence),
        inputs.param("complexity")?.unwrap_or(e.complexity),
    ))
}

/// `"C:maj G:maj | A:min F:maj"`: bars separated by `|`, chords within a bar
/// by whitespace.
pub fn parse_bars(spec: &str) -> Result<Vec<Vec<Chord>>, String> {
    let bars: Vec<Vec<Chord>> = spec
        .split('|')
        .map(|bar| bar.split_whitespace().map(|s| s.parse::<Chord>().map_err(|e| e.to_string())).collect())
        .collect::<Result<_, _>>()?;
    if bars.iter().any(Vec::is_empty) {
        return Err("every bar needs at least one chord".into());
    }
    Ok(bars)
}

fn constant_progression() -> FnBlock {
    FnBlock {
        descriptor: desc(
            "constant_progression",
            "Fixed chords, cycling through `|`-separated bars.",
            BlockRole::Processor,
            vec![],
            vec![PortSpec::output("chords", PortType::Chords)],
            vec![ParamSpec::text("chords", "C:maj").with_doc("e.g. \"C:maj G:maj | A:min F:maj\"")],
        ),
        eval: |_, params, ctx| {
            let bars = parse_bars(text(params, "chords")).map_err(|reason| BlockError::Param {
                param: "chords".into(),
                reason,
            })?;
            let chords = &bars[ctx.bar_index as usize % bars.len()];
            let prog = ChordProgression::one_bar(ctx.time_sig, chords)?;
            Ok(out([("chords", PortValue::Chords(prog))]))
        },
        check: |params| match parse_bars(text(params, "chords")) {
            Ok(_) => vec![],
            Err(reason) => vec![("chords".into(), reason)],
        },
    }
}

fn tempo_block() -> FnBlock {
    FnBlock {
        descriptor: desc(
            "tempo_map",
            "Tempo from energy: 70 + 90 * energy bpm.",
            BlockRole::Tempo,
            vec![emotion_input("energy")],
            vec![PortSpec::output("bpm", PortType::Param)],
            vec![emotion_param("energy")],
        ),
        eval: |inputs, _, _| {
            let energy = inputs.require_param("energy")?;
            Ok(out([("bpm", PortValue::Param(tempo_map(energy) as f64))]))
        },
        check: no_check,
    }
}

fn progression_block() -> FnBlock {
    FnBlock {
        descriptor: desc(
            "progression_generator",
            "Functional-harmony chords; valence picks the palette, complexity the extensions. Phrases of four bars open on the tonic and resolve.",
            BlockRole::Processor,
            vec![emotion_input("valence"), emotion_input("complexity")],
            vec![PortSpec::output("chords", PortType::Chords)],
            vec![key_param(), emotion_param("valence"), emotion_param("complexity")],
        ),
        eval: |inputs, params, ctx| {
            let emotion = emotion_from(inputs, ctx)?;
            let pos = (ctx.bar_index % PHRASE_BARS) as usize;
            let resolve = pos + 1 == PHRASE_BARS as usize || ctx.is_last_bar();
            let key = Scale::new(PitchClass::new(int(params, "key_root")), ValenceBand::from_valence(emotion.valence).mode());
            let prog = generate_progression_from(&emotion, key, 1, ctx.time_sig, PHRASE_PLAN[pos], resolve, ctx.rng_seed);
            Ok(out([("chords", PortValue::Chords(prog))]))
        },
        check: no_check,
    }
}

fn rhythm_block() -> FnBlock {
    FnBlock {
        descriptor: desc(
            "rhythm_generator",
            "One bar of onsets; energy sets density, complexity the grid and syncopation.",
            BlockRole::Processor,
            vec![emotion_input("energy"), emotion_input("complexity")],
            vec![PortSpec::output("rhythm", PortType::Rhythm)],
            vec![emotion_param("energy"), emotion_param("complexity")],
        ),
        eval: |inputs, _, ctx| {
            let emotion = emotion_from(inputs, ctx)?;
            Ok(out([("rhythm", PortValue::Rhythm(generate_rhythm(&emotion, ctx.time_sig, ctx.rng_seed)))]))
        },
        check: no_check,
    }
}

fn melody_block() -> FnBlock {
    FnBlock {
        descriptor: desc(
            "melody_improviser",
            "One note per rhythm onset over the input chords.",
            BlockRole::Processor,
            vec![
                PortSpec::input("chords", PortType::Chords, InputDefault::Required),
                PortSpec::input(
                    "rhythm",
                    PortType::Rhythm,
                    InputDefault::Fallback {
                        description: "one onset per beat".into(),
                    },
                ),
                emotion_input("energy"),
                emotion_input("valence"),
                emotion_input("complexity"),
            ],
            vec![PortSpec::output("notes", PortType::Notes)],
            vec![key_param(), emotion_param("energy"), emotion_param("valence"), emotion_param("complexity")],
        ),
        eval: |inputs, params, ctx| {
            let emotion = emotion_from(inputs, ctx)?;
            let chords = inputs.require_chords("chords")?;
            let beats;
            let rhythm = match inputs.rhythm("rhythm")? {
                Some(r) => r,
                None => {
                    beats = RhythmPattern::on_beats(ctx.time_sig);
                    &beats
                }
            };
            let key = Scale::new(PitchClass::new(int(params, "key_root")), ValenceBand::from_valence(emotion.valence).mode());
            let notes = improvise_melody(chords, rhythm, &emotion, key, ctx.rng_seed)?;
            Ok(out([("notes", PortValue::Notes(notes))]))
        },
        check: no_check,
    }
}

fn load_corpus(params: &ParamValues, ctx: &EvalContext) -> Result<MotifCorpus, BlockError> {
    let dir = text(params, "corpus");
    if dir.is_empty() {
        return Ok(MotifCorpus::bundled(ctx.time_sig));
    }
    MotifCorpus::load_dir(Path::new(dir), ctx.time_sig).map_err(|e| BlockError::Param {
        param: "corpus".into(),
        reason: e.to_string(),
    })
}

fn latent_block() -> FnBlock {
    FnBlock {
        descriptor: desc(
            "latent_melody",
            "Blend of four corner motifs at latent position (x, y), snapped to the chords when connected.",
            BlockRole::Processor,
            vec![
                emotion_input("x"),
                emotion_input("y"),
                PortSpec::input(
                    "chords",
                    PortType::Chords,
                    InputDefault::Fallback {
                        description: "no chord snapping".into(),
                    },
                ),
            ],
            vec![PortSpec::output("notes", PortType::Notes)],
            vec![
                ParamSpec::number("x", 0.0, 1.0, 0.25),
                ParamSpec::number("y", 0.0, 1.0, 0.25),
                ParamSpec::text("corpus", "").with_doc("directory with corner0.mid..corner3.mid; empty uses the bundled motifs"),
            ],
        ),
        eval: |inputs, params, ctx| {
            let corpus = load_corpus(params, ctx)?;
            let coord = LatentCoord::new(inputs.require_param("x")?, inputs.require_param("y")?);
            let notes = latent_melody(&corpus, coord, inputs.chords("chords")?);
            Ok(out([("notes", PortValue::Notes(notes))]))
        },
        check: |params| {
            let dir = text(params, "corpus");
            if dir.is_empty() || Path::new(dir).is_dir() {
                vec![]
            } else {
                vec![("corpus".into(), format!("{dir:?} is not a directory"))]
            }
        },
    }
}

fn counter_block() -> FnBlock {
    FnBlock {
        descriptor: desc(
            "countermelody",
            "Lead inverted around its median, a fifth lower, snapped to the chords and thinned by complexity.",
            BlockRole::Processor,
            vec![
                PortSpec::input("lead", PortType::Notes, InputDefault::Required),
                PortSpec::input("chords", PortType::Chords, InputDefault::Required),
                emotion_input("complexity"),
            ],
            vec![PortSpec::output("notes", PortType::Notes)],
            vec![emotion_param("complexity")],
        ),
        eval: |inputs, _, ctx| {
            let emotion = emotion_from(inputs, ctx)?;
            let notes = countermelody(inputs.require_notes("lead")?, inputs.require_chords("chords")?, &emotion, ctx.rng_seed)?;
            Ok(out([("notes", PortValue::Notes(notes))]))
        },
        check: no_check,
    }
}

fn curve_source() -> FnBlock {
    FnBlock {
        descriptor: desc(
            "curve_source",
            "The song's emotion curves sampled at the start of the bar.",
            BlockRole::Processor,
            vec![],
            vec![
                PortSpec::output("energy", PortType::Param),
                PortSpec::output("valence", PortType::Param),
                PortSpec::output("complexity", PortType::Param),
            ],
            vec![],
        ),
        eval: |_, _, ctx| {
            let e = ctx.emotion;
            Ok(out([
                ("energy", PortValue::Param(e.energy)),
                ("valence", PortValue::Param(e.valence)),
                ("complexity", PortValue::Param(e.complexity)),
            ]))
        },
        check: no_check,
    }
}

fn midi_sink() -> FnBlock {
    FnBlock {
        descriptor: desc(
            "midi_sink",
            "Collects notes into one MIDI track.",
            BlockRole::Sink,
            vec![PortSpec::input("notes", PortType::Notes, InputDefault::Required)],
            vec![],
            vec![
                ParamSpec::text("name", "").with_doc("track name; empty uses the node id"),
                ParamSpec::integer("channel", 0, 15, 0),
                ParamSpec::integer("program", 0, 127, 0).with_doc("General MIDI program"),
            ],
        ),
        eval: |_, _, _| Ok(BlockOutputs::new()),
        check: no_check,
    }
}

/// Registry holding every built-in kind.
pub fn default_registry() -> Registry {
    let mut r = Registry::new();
    for block in [
        constant_progression(),
        tempo_block(),
        progression_block(),
        rhythm_block(),
        melody_block(),
        latent_block(),
        counter_block(),
        curve_source(),
        midi_sink(),
    ] {
        r.register(Arc::new(block)).expect("built-in descriptors are well formed");
    }
    r
}
