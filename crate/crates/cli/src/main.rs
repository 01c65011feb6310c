//! `dynsong`: render, validate and inspect dynamic songs, or serve them
//! for live playback.
//!
//! Exit codes: 0 success, 1 invalid input (song, curves or arguments),
//! 2 I/O failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use dynsong_core::curves::{song_position, CurveFileError, CurveSet};
use dynsong_core::graph::{evaluate_song, Diagnostic, LoadError, Registry, SongDocument, SongGraph};
use dynsong_core::render::render_song;
use dynsong_core::default_registry;
use dynsong_transport::ServeConfig;

#[derive(Parser)]
#[command(name = "dynsong", version, about = "Emotion-driven dynamic songs")]
struct Cli {
    /// Print errors and diagnostics as JSON on stderr.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a song with its curves to a Standard MIDI File.
    Render {
        song: PathBuf,
        curves: PathBuf,
        /// Output file [default: the song path with a .mid extension]
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed [default: the song's master_seed]
        #[arg(long)]
        seed: Option<u64>,
        /// Song length in bars [default: the song's length_bars]
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        bars: Option<u32>,
    },
    /// Check a song file; prints nothing and exits 0 when it is valid.
    Validate { song: PathBuf },
    /// Show a song's evaluation order, wiring and, given curves, the
    /// per-bar emotion and tempo.
    Inspect {
        song: PathBuf,
        curves: Option<PathBuf>,
    },
    /// Print every registered block kind as JSON, sorted by kind.
    ListBlocks,
    /// Serve a song library over HTTP and websockets.
    Serve {
        /// TOML config file; flags below override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Library directory [default: library]
        #[arg(long)]
        library: Option<PathBuf>,
        /// Listen address [default: 127.0.0.1:8080]
        #[arg(long)]
        listen: Option<String>,
        /// Seed for sessions that do not request one [default: the song's]
        #[arg(long)]
        seed: Option<u64>,
        /// Playback speed multiplier [default: 1.0]
        #[arg(long)]
        speed: Option<f64>,
    },
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    kind: &'static str,
    path: Option<PathBuf>,
    message: String,
    diagnostics: Vec<Value>,
}

impl Failure {
    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure {
            code: 2,
            kind: "io",
            path: Some(path.into()),
            message: e.to_string(),
            diagnostics: Vec::new(),
        }
    }

    fn invalid(kind: &'static str, path: Option<&Path>, message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            kind,
            path: path.map(Into::into),
            message: message.into(),
            diagnostics: Vec::new(),
        }
    }

    fn report(&self, json: bool) {
        let path = self.path.as_ref().map(|p| p.display().to_string());
        if json {
            let v = json!({
                "error": self.kind,
                "path": path,
                "message": self.message,
                "diagnostics": self.diagnostics,
            });
            eprintln!("{v}");
            return;
        }
        let prefix = path.map(|p| format!("{p}: ")).unwrap_or_default();
        eprintln!("error: {prefix}{}", self.message);
        for d in &self.diagnostics {
            eprintln!("  {}", d["text"].as_str().unwrap_or_default());
        }
    }
}

/// One diagnostic with the ids it refers to spelled out.
fn describe(d: &Diagnostic, doc: &SongDocument) -> Value {
    let mut text = String::new();
    if let Some(i) = d.edge {
        match doc.edges.get(i) {
            Some(e) => text.push_str(&format!("edge {i} ({} -> {}): ", e.from, e.to)),
            None => text.push_str(&format!("edge {i}: ")),
        }
    } else if let Some(n) = &d.node {
        text.push_str(&format!("node {n}: "));
    }
    text.push_str(&d.to_string());
    let mut v = serde_json::to_value(d).expect("diagnostics serialize");
    v["text"] = json!(text);
    v
}

fn load_document(path: &Path) -> Result<SongDocument, Failure> {
    SongDocument::load(path).map_err(|e| match e {
        LoadError::Io(e) => Failure::io(path, e),
        other => Failure::invalid("syntax", Some(path), other.to_string()),
    })
}

fn check(doc: &SongDocument, path: &Path, registry: &Registry) -> Result<SongGraph, Failure> {
    doc.into_graph(registry).map_err(|diags| Failure {
        diagnostics: diags.iter().map(|d| describe(d, doc)).collect(),
        ..Failure::invalid("validation", Some(path), format!("{} problem(s) in song", diags.len()))
    })
}

fn load_curves(path: &Path) -> Result<CurveSet<f64>, Failure> {
    CurveSet::load(path).map_err(|e| match e {
        CurveFileError::Io { source, .. } => Failure::io(path, source),
        other => Failure::invalid("curves", Some(path), other.to_string()),
    })
}

fn render(song: &Path, curves: &Path, out: Option<PathBuf>, seed: Option<u64>, bars: Option<u32>) -> Result<(), Failure> {
    let registry = default_registry();
    let doc = load_document(song)?;
    let curves = load_curves(curves)?;
    let mut graph = check(&doc, song, &registry)?;
    if let Some(s) = seed {
        graph.master_seed = s;
    }
    if let Some(b) = bars {
        graph
            .set_length_bars(b)
            .map_err(|e| Failure::invalid("arguments", None, e.to_string()))?;
    }
    let bytes = render_song(&graph, &registry, &curves).map_err(|e| Failure::invalid("render", Some(song), e.to_string()))?;
    let out = out.unwrap_or_else(|| default_out(song));
    std::fs::write(&out, bytes).map_err(|e| Failure::io(&out, e))
}

/// `x.song.json` -> `x.mid`, beside the song.
fn default_out(song: &Path) -> PathBuf {
    let name = song.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name
        .strip_suffix(".song.json")
        .or_else(|| name.strip_suffix(".json"))
        .unwrap_or(&name);
    song.with_file_name(format!("{stem}.mid"))
}

fn inspect(song: &Path, curves: Option<&Path>, as_json: bool) -> Result<(), Failure> {
    let registry = default_registry();
    let doc = load_document(song)?;
    let graph = check(&doc, song, &registry)?;
    let order: Vec<Value> = graph
        .topo_order()
        .iter()
        .map(|id| json!({"id": id, "kind": graph.node(id).map(|n| n.kind())}))
        .collect();
    let edges: Vec<String> = graph.edges().iter().map(ToString::to_string).collect();
    let mut bars = Vec::new();
    if let Some(p) = curves {
        let c = load_curves(p)?;
        let out = evaluate_song(&graph, &registry, &c).map_err(|e| Failure::invalid("evaluation", Some(song), e.to_string()))?;
        for b in &out.bars {
            let notes: usize = out
                .sinks
                .values()
                .map(|s| s.events().iter().filter(|n| bar_of(&graph, n.start) == b.bar_index).count())
                .sum();
            bars.push(json!({
                "bar": b.bar_index,
                "position": song_position::<f64>(b.bar_index, graph.length_bars()),
                "emotion": b.emotion,
                "bpm": b.bpm,
                "notes": notes,
            }));
        }
    }
    if as_json {
        let v = json!({
            "title": graph.title,
            "length_bars": graph.length_bars(),
            "time_sig": graph.time_sig.to_string(),
            "master_seed": graph.master_seed,
            "order": order,
            "edges": edges,
            "bars": bars,
        });
        println!("{}", serde_json::to_string_pretty(&v).expect("json"));
        return Ok(());
    }
    println!("{} ({} bars of {}, seed {})", graph.title, graph.length_bars(), graph.time_sig, graph.master_seed);
    println!("evaluation order:");
    for n in &order {
        println!("  {:<14} {}", n["id"].as_str().unwrap_or_default(), n["kind"].as_str().unwrap_or_default());
    }
    println!("edges:");
    for e in &edges {
        println!("  {e}");
    }
    if !bars.is_empty() {
        println!("bar  energy valence complexity  bpm notes");
        for b in &bars {
            let e = &b["emotion"];
            println!(
                "{:>3}  {:>6.3} {:>7.3} {:>10.3}  {:>3} {:>5}",
                b["bar"].as_u64().unwrap_or(0), e["energy"].as_f64().unwrap_or(0.0), e["valence"].as_f64().unwrap_or(0.0),
                e["complexity"].as_f64().unwrap_or(0.0), b["bpm"].as_u64().unwrap_or(0), b["notes"].as_u64().unwrap_or(0)
            );
        }
    }
    Ok(())
}

fn bar_of(graph: &SongGraph, tick: u64) -> u32 {
    let per_bar = dynsong_core::theory::bar_to_tick(1, graph.time_sig, dynsong_core::theory::PPQ);
    (tick / per_bar) as u32
}

fn list_blocks() {
    let registry = default_registry();
    let v: Vec<_> = registry.descriptors();
    let text = serde_json::to_string_pretty(&v).expect("descriptors serialize");
    // a closed pipe (e.g. `| head`) is not an error worth a panic
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn serve(
    config: Option<PathBuf>,
    library: Option<PathBuf>,
    listen: Option<String>,
    seed: Option<u64>,
    speed: Option<f64>,
) -> Result<(), Failure> {
    let mut cfg = match &config {
        Some(p) => ServeConfig::load(p).map_err(|e| match e {
            dynsong_transport::config::ConfigError::Io { source, .. } => Failure::io(p, source),
            other => Failure::invalid("config", Some(p), other.to_string()),
        })?,
        None => ServeConfig::default(),
    };
    if let Some(l) = library {
        cfg.library = l;
    }
    if let Some(l) = listen {
        cfg.listen = l;
    }
    if seed.is_some() {
        cfg.default_seed = seed;
    }
    if let Some(s) = speed {
        cfg.speed = s;
    }
    cfg.validate().map_err(|e| Failure::invalid("config", None, e.to_string()))?;
    if !cfg.library.is_dir() {
        return Err(Failure::io(&cfg.library, "library directory not found"));
    }
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::io(Path::new("."), e))?;
    rt.block_on(async move {
        let library = cfg.library.clone();
        let listen = cfg.listen.clone();
        let (addr, server) = dynsong_transport::server::bind(cfg, default_registry())
            .await
            .map_err(|e| Failure::invalid("listen", None, format!("{listen}: {e}")))?;
        eprintln!("serving {} on http://{addr}", library.display());
        server.await.map_err(|e| Failure::invalid("listen", None, e.to_string()))
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors are invalid input; exit 2 is kept for I/O
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Render {
            song,
            curves,
            out,
            seed,
            bars,
        } => render(&song, &curves, out, seed, bars),
        Command::Validate { song } => {
            let registry = default_registry();
            load_document(&song).and_then(|doc| check(&doc, &song, &registry).map(drop))
        }
        Command::Inspect { song, curves } => inspect(&song, curves.as_deref(), cli.json),
        Command::ListBlocks => {
            list_blocks();
            Ok(())
        }
        Command::Serve {
            config,
            library,
            listen,
            seed,
            speed,
        } => serve(config, library, listen, seed, speed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            f.report(cli.json);
            ExitCode::from(f.code)
        }
    }
}
