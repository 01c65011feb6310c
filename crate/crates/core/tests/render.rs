use std::collections::BTreeMap;
use std::path::PathBuf;

use dynsong_core::blocks::default_registry;
use dynsong_core::curves::CurveSet;
use dynsong_core::graph::{evaluate_song, SongGraph};
use dynsong_core::latent::MotifCorpus;
use dynsong_core::midi::{write_midi, TempoEvent, TrackPlan};
use dynsong_core::render::{assemble, render_song};
use dynsong_core::theory::{NoteEvent, NoteSequence, Pitch, TimeSignature, PPQ};
use midly::{MetaMessage, MidiMessage, Smf, Timing, TrackEventKind};
use proptest::prelude::*;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn golden(name: &str) -> PathBuf {
    root().join("tests/golden").join(name)
}

fn example() -> (SongGraph, CurveSet<f64>) {
    let lib = root().join("../../library");
    let reg = default_registry();
    let g = SongGraph::load(&lib.join("simple_dynamic_song.song.json"), &reg).unwrap();
    let c = CurveSet::load(&lib.join("simple_dynamic_song.curves.json")).unwrap();
    (g, c)
}

type NoteTuple = (u8, u64, u64, u8);

struct Parsed {
    division: u16,
    tempi: Vec<(u64, u32)>,
    /// per track: (channel, program, sorted notes)
    tracks: Vec<(Option<u8>, Option<u8>, Vec<NoteTuple>)>,
}

/// Reads a file with midly, pairing note-ons with the next note-off of the
/// same key.
fn parse(bytes: &[u8]) -> Parsed {
    let smf = Smf::parse(bytes).unwrap();
    let division = match smf.header.timing {
        Timing::Metrical(t) => t.as_int(),
        _ => panic!("timecode"),
    };
    let mut tempi = Vec::new();
    let mut tracks = Vec::new();
    for (ti, track) in smf.tracks.iter().enumerate() {
        let mut now = 0u64;
        let mut open: BTreeMap<u8, Vec<(u64, u8)>> = BTreeMap::new();
        let mut notes = Vec::new();
        let (mut channel, mut program) = (None, None);
        for ev in track {
            now += ev.delta.as_int() as u64;
            match ev.kind {
                TrackEventKind::Meta(MetaMessage::Tempo(us)) => tempi.push((now, us.as_int())),
                TrackEventKind::Midi { channel: ch, message } => {
                    channel = Some(ch.as_int());
                    match message {
                        MidiMessage::ProgramChange { program: p } => program = Some(p.as_int()),
                        MidiMessage::NoteOn { key, vel } if vel.as_int() > 0 => {
                            open.entry(key.as_int()).or_default().push((now, vel.as_int()))
                        }
                        MidiMessage::NoteOn { key, .. } | MidiMessage::NoteOff { key, .. } => {
                            let (start, vel) = open.get_mut(&key.as_int()).unwrap().remove(0);
                            notes.push((key.as_int(), start, now - start, vel));
                        }
                        _ => {}
                    }
                }
                _ => {}
            }
        }
        assert!(open.values().all(Vec::is_empty), "track {ti} has hanging notes");
        notes.sort_by_key(|&(p, s, d, v)| (s, p, d, v));
        tracks.push((channel, program, notes));
    }
    Parsed { division, tempi, tracks }
}

fn as_tuples(seq: &NoteSequence) -> Vec<(u8, u64, u64, u8)> {
    let mut v: Vec<_> = seq.events().iter().map(|e| (e.pitch.midi(), e.start, e.duration, e.velocity)).collect();
    v.sort_by_key(|&(p, s, d, v)| (s, p, d, v));
    v
}

#[test]
fn single_note_round_trips_through_midly() {
    let note = NoteEvent::new(Pitch::new(60).unwrap(), 0, 480, 100).unwrap();
    let plan = TrackPlan {
        name: "solo".into(),
        channel: 3,
        program: 11,
        events: NoteSequence::from_events(vec![note]),
    };
    let bytes = write_midi(&[plan], &[TempoEvent { tick: 0, bpm: 115.0 }], PPQ).unwrap();
    let p = parse(&bytes);
    assert_eq!(p.division, 480);
    assert_eq!(p.tempi, vec![(0, 521_739)]);
    assert_eq!(p.tracks.len(), 2);
    assert_eq!(p.tracks[1], (Some(3), Some(11), vec![(60, 0, 480, 100)]));
}

/// Notes per pitch never overlap, so note pairing is unambiguous.
fn track_strategy() -> impl Strategy<Value = TrackPlan> {
    (0u8..16, 0u8..128, prop::collection::vec((0u8..128, 0u64..4000, 1u64..960, 1u8..128), 0..40)).prop_map(
        |(channel, program, raw)| {
            let mut busy: BTreeMap<u8, Vec<(u64, u64)>> = BTreeMap::new();
            let mut events = Vec::new();
            for (pitch, start, dur, vel) in raw {
                let spans = busy.entry(pitch).or_default();
                if spans.iter().any(|&(s, e)| start <= e && s <= start + dur) {
                    continue;
                }
                spans.push((start, start + dur));
                events.push(NoteEvent::new(Pitch::new(pitch as i64).unwrap(), start, dur, vel).unwrap());
            }
            TrackPlan {
                name: String::new(),
                channel,
                program,
                events: NoteSequence::from_events(events),
            }
        },
    )
}

proptest! {
    #[test]
    fn random_tracks_round_trip(tracks in prop::collection::vec(track_strategy(), 1..4)) {
        let bytes = write_midi(&tracks, &[], PPQ).unwrap();
        let p = parse(&bytes);
        prop_assert_eq!(p.tracks.len(), tracks.len() + 1);
        for (plan, (ch, prog, notes)) in tracks.iter().zip(&p.tracks[1..]) {
            prop_assert_eq!(notes, &as_tuples(&plan.events));
            if !plan.events.is_empty() {
                prop_assert_eq!(*ch, Some(plan.channel));
                prop_assert_eq!(*prog, Some(plan.program));
            }
        }
        prop_assert_eq!(write_midi(&tracks, &[], PPQ).unwrap(), bytes);
    }
}

#[test]
fn example_song_parses_back_to_its_evaluation() {
    let (g, c) = example();
    let reg = default_registry();
    let out = evaluate_song(&g, &reg, &c).unwrap();
    let plan = assemble(&g, &out.bars, &out.sinks).unwrap();
    let bytes = render_song(&g, &reg, &c).unwrap();
    let p = parse(&bytes);
    assert_eq!(p.tracks.len(), 3);
    let sinks = g.sinks();
    assert_eq!(sinks.iter().map(|n| n.id.as_str()).collect::<Vec<_>>(), ["counter_out", "lead_out"]);
    for (node, track) in sinks.iter().zip(&p.tracks[1..]) {
        assert_eq!(track.2, as_tuples(&out.sinks[&node.id]));
        assert_eq!(track.0, node.params["channel"].as_i64().map(|c| c as u8));
    }
    assert_eq!(p.tempi.len(), plan.tempi.len());
    assert!(p.tempi.len() > 1, "curves should move the tempo");
}

/// Set `UPDATE_GOLDEN=1` to regenerate after an intentional change.
fn check_golden(name: &str, actual: &[u8]) {
    let path = golden(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(expected == actual, "{name} differs from the frozen golden file");
}

#[test]
fn example_song_matches_golden_files() {
    let (g, c) = example();
    let reg = default_registry();
    let out = evaluate_song(&g, &reg, &c).unwrap();
    let json = serde_json::to_string_pretty(&out.sinks).unwrap() + "\n";
    check_golden("simple_dynamic_song_seed42.notes.json", json.as_bytes());
    check_golden("simple_dynamic_song_seed42.mid", &render_song(&g, &reg, &c).unwrap());
}

#[test]
fn bundled_corpus_assets_match_built_in_motifs() {
    let dir = root().join("assets/corpus");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(&dir).unwrap();
        MotifCorpus::bundled(TimeSignature::COMMON).write_dir(&dir).unwrap();
    }
    let loaded = MotifCorpus::load_dir(&dir, TimeSignature::COMMON).unwrap();
    assert_eq!(loaded, MotifCorpus::bundled(TimeSignature::COMMON));
}
