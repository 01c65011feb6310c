use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn library() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../library")
}

fn song() -> PathBuf {
    library().join("simple_dynamic_song.song.json")
}

fn curves() -> PathBuf {
    library().join("simple_dynamic_song.curves.json")
}

fn dynsong(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynsong")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes a copy of the example song with `edit` applied.
fn variant(dir: &Path, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(song()).unwrap()).unwrap();
    edit(&mut doc);
    let p = dir.join("variant.song.json");
    std::fs::write(&p, doc.to_string()).unwrap();
    p
}

#[test]
fn render_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.mid");
    let b = dir.path().join("b.mid");
    for out in [&a, &b] {
        let o = dynsong(&["render", s(&song()), s(&curves()), "--seed", "42", "--out", s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(o.stdout.is_empty());
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(&bytes[..4], b"MThd");
    assert_eq!(bytes, std::fs::read(&b).unwrap());
}

#[test]
fn render_overrides_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let (song, curves) = (song(), curves());
    let run = |extra: &[&str], name: &str| {
        let out = dir.path().join(name);
        let mut args = vec!["render", s(&song), s(&curves), "--out", s(&out)];
        args.extend_from_slice(extra);
        let o = dynsong(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out).unwrap()
    };
    let base = run(&[], "base.mid");
    assert_ne!(base, run(&["--seed", "7"], "seed.mid"));
    let short = run(&["--bars", "4"], "short.mid");
    assert!(short.len() < base.len());
    // argument errors are invalid input, not I/O
    assert_eq!(dynsong(&["render", s(&song), s(&curves), "--bars", "0"]).status.code(), Some(1));
}

#[test]
fn render_defaults_output_beside_the_song() {
    let dir = tempfile::tempdir().unwrap();
    let copy = dir.path().join("tune.song.json");
    std::fs::copy(song(), &copy).unwrap();
    let o = dynsong(&["render", s(&copy), s(&curves())]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("tune.mid").is_file());
}

#[test]
fn missing_file_is_an_io_error() {
    let o = dynsong(&["render", "/no/such/song.json", s(&curves())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/song.json"));
    let o = dynsong(&["render", s(&song()), "/no/such/curves.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/curves.json"));
}

#[test]
fn dangling_edge_names_the_edge() {
    let dir = tempfile::tempdir().unwrap();
    let p = variant(dir.path(), |d| {
        d["edges"].as_array_mut().unwrap().push(json!({"from": "ghost.notes", "to": "lead_out.notes"}));
    });
    let o = dynsong(&["render", s(&p), s(&curves()), "--out", s(&dir.path().join("x.mid"))]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("edge 11") && err.contains("ghost"), "{err}");
    assert!(!dir.path().join("x.mid").exists());
}

#[test]
fn validate_reports() {
    let o = dynsong(&["validate", s(&song())]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty() && o.stderr.is_empty());

    let dir = tempfile::tempdir().unwrap();
    let p = variant(dir.path(), |d| {
        d["edges"][6]["from"] = json!("harmony.chords");
    });
    let o = dynsong(&["validate", s(&p)]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("TypeMismatch") && err.contains("Chords") && err.contains("Notes"), "{err}");

    let p = variant(dir.path(), |d| {
        d["nodes"][1]["kind"] = json!("reverb");
    });
    let o = dynsong(&["--json", "validate", s(&p)]);
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert_eq!(v["error"], "validation");
    let d = &v["diagnostics"][0];
    assert_eq!(d["code"], "UnknownBlockKind");
    assert_eq!(d["node"], "tempo");
    for kind in ["curve_source", "midi_sink", "tempo_map", "latent_melody"] {
        assert!(d["message"].as_str().unwrap().contains(kind));
    }

    std::fs::write(&p, "{\n  \"title\": ").unwrap();
    let o = dynsong(&["validate", s(&p)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn list_blocks_is_sorted_and_stable() {
    let a = dynsong(&["list-blocks"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, dynsong(&["list-blocks"]).stdout);
    let v: Vec<Value> = serde_json::from_slice(&a.stdout).unwrap();
    let kinds: Vec<&str> = v.iter().map(|b| b["kind"].as_str().unwrap()).collect();
    assert_eq!(
        kinds,
        [
            "constant_progression",
            "countermelody",
            "curve_source",
            "latent_melody",
            "melody_improviser",
            "midi_sink",
            "progression_generator",
            "rhythm_generator",
            "tempo_map"
        ]
    );
    for b in &v {
        for p in b["params"].as_array().unwrap() {
            assert!(p.get("default").is_some());
        }
    }
}

#[test]
fn inspect_json_lists_bars() {
    let o = dynsong(&["--json", "inspect", s(&song()), s(&curves())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["bars"].as_array().unwrap().len(), 16);
    assert_eq!(v["order"][0]["id"], "curves");
    assert_eq!(v["bars"][0]["bpm"], 88);
}

#[test]
fn serve_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("serve.toml");
    std::fs::write(&cfg, "speed = -1.0\n").unwrap();
    let o = dynsong(&["serve", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    let o = dynsong(&["serve", "--library", "/no/such/library"]);
    assert_eq!(o.status.code(), Some(2));
}
