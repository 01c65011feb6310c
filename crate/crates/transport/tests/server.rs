use std::net::SocketAddr;
use std::path::Path;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;

use dynsong_core::default_registry;
use dynsong_transport::ServeConfig;

type Socket = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

fn copy_library(to: &Path) {
    let from = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../library");
    for e in std::fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        std::fs::copy(e.path(), to.join(e.file_name())).unwrap();
    }
}

async fn start(dir: &Path, speed: f64) -> SocketAddr {
    let cfg = ServeConfig {
        library: dir.to_path_buf(),
        listen: "127.0.0.1:0".into(),
        default_seed: None,
        speed,
    };
    let (addr, server) = dynsong_transport::server::bind(cfg, default_registry()).await.unwrap();
    tokio::spawn(server);
    addr
}

async fn create(addr: SocketAddr, body: Value) -> reqwest::Response {
    reqwest::Client::new()
        .post(format!("http://{addr}/sessions"))
        .json(&body)
        .send()
        .await
        .unwrap()
}

async fn connect(addr: SocketAddr, session: &str) -> Socket {
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/{session}/ws"))
        .await
        .unwrap();
    ws
}

async fn send(ws: &mut Socket, msg: Value) {
    ws.send(Message::Text(msg.to_string())).await.unwrap();
}

/// Next JSON message, failing the test after a generous timeout.
async fn next(ws: &mut Socket) -> Value {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(20), ws.next())
            .await
            .expect("timed out waiting for a message")
            .unwrap()
            .unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

async fn next_of(ws: &mut Socket, ty: &str) -> Value {
    loop {
        let v = next(ws).await;
        if v["type"] == ty {
            return v;
        }
    }
}

#[tokio::test]
async fn http_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    copy_library(dir.path());
    let addr = start(dir.path(), 1.0).await;
    let http = reqwest::Client::new();

    let songs: Value = http.get(format!("http://{addr}/songs")).send().await.unwrap().json().await.unwrap();
    assert_eq!(songs[0]["id"], "simple_dynamic_song");
    assert_eq!(songs[0]["has_curves"], true);

    let song: Value = http
        .get(format!("http://{addr}/songs/simple_dynamic_song"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(song["song"]["length_bars"], 16);
    assert!(song["curves"]["valence"].is_array());

    let missing = http.get(format!("http://{addr}/songs/nope")).send().await.unwrap();
    assert_eq!(missing.status(), 404);
    assert_eq!(missing.json::<Value>().await.unwrap()["code"], "not_found");

    let blocks: Value = http.get(format!("http://{addr}/blocks")).send().await.unwrap().json().await.unwrap();
    let kinds: Vec<&str> = blocks["blocks"].as_array().unwrap().iter().map(|b| b["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds.len(), 9);
    assert!(kinds.windows(2).all(|w| w[0] < w[1]));
    let colours: Vec<&str> = blocks["port_types"].as_array().unwrap().iter().map(|p| p["color"].as_str().unwrap()).collect();
    let mut unique = colours.clone();
    unique.dedup();
    assert_eq!(unique.len(), 4);
    for b in blocks["blocks"].as_array().unwrap() {
        for p in b["inputs"].as_array().unwrap().iter().chain(b["outputs"].as_array().unwrap()) {
            let c = p["color"].as_str().unwrap();
            let expected = blocks["port_types"]
                .as_array()
                .unwrap()
                .iter()
                .find(|t| t["type"] == p["type"])
                .unwrap();
            assert_eq!(c, expected["color"]);
        }
    }

    let made = create(addr, json!({"song": "simple_dynamic_song", "seed": 3})).await;
    assert_eq!(made.status(), 201);
    let made: Value = made.json().await.unwrap();
    assert_eq!(made["state"], "stopped");
    assert_eq!(made["length_bars"], 16);

    let status: Value = http
        .get(format!("http://{addr}/sessions/{}", made["session"].as_str().unwrap()))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(status["playhead_bar"], 0);

    assert_eq!(create(addr, json!({"song": "nope"})).await.status(), 404);
}

#[tokio::test]
async fn invalid_song_is_rejected_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    copy_library(dir.path());
    let path = dir.path().join("simple_dynamic_song.song.json");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut doc: Value = serde_json::from_str(&text).unwrap();
    doc["edges"].as_array_mut().unwrap().push(json!({"from": "melody.notes", "to": "tempo.energy"}));
    std::fs::write(dir.path().join("broken.song.json"), doc.to_string()).unwrap();
    let addr = start(dir.path(), 1.0).await;

    let resp = create(addr, json!({"song": "broken"})).await;
    assert_eq!(resp.status(), 422);
    let body: Value = resp.json().await.unwrap();
    assert_eq!(body["code"], "validation");
    let codes: Vec<&Value> = body["diagnostics"].as_array().unwrap().iter().map(|d| &d["code"]).collect();
    assert!(codes.contains(&&json!("TypeMismatch")), "{codes:?}");
}

#[tokio::test]
async fn socket_playback_edit_and_save() {
    let dir = tempfile::tempdir().unwrap();
    copy_library(dir.path());
    // fast enough that the song plays out in well under a second
    let addr = start(dir.path(), 200.0).await;
    let made: Value = create(addr, json!({"song": "simple_dynamic_song", "seed": 5}))
        .await
        .json()
        .await
        .unwrap();
    let id = made["session"].as_str().unwrap();
    let mut ws = connect(addr, id).await;

    send(&mut ws, json!({"type": "rewind"})).await;
    assert_eq!(next(&mut ws).await["code"], "bad_message");

    send(&mut ws, json!({"type": "curve_edit", "curve": "energy", "op": {"kind": "insert", "point": [0.3, 0.8]}})).await;
    let ack = next(&mut ws).await;
    assert_eq!(ack, json!({"type": "ack", "command": "curve_edit", "effective_bar": 0}));

    send(&mut ws, json!({"type": "seek", "bar": 99})).await;
    assert_eq!(next(&mut ws).await["code"], "seek_out_of_range");

    send(&mut ws, json!({"type": "play"})).await;
    assert_eq!(next_of(&mut ws, "transport_changed").await["state"], "playing");
    let mut bars = Vec::new();
    let mut last_tick = 0;
    loop {
        let v = next(&mut ws).await;
        if let Some(t) = v["tick"].as_u64() {
            assert!(t >= last_tick);
            last_tick = t;
        }
        match v["type"].as_str().unwrap() {
            "bar_boundary" => bars.push(v["bar"].as_u64().unwrap()),
            "transport_changed" => {
                assert_eq!(v["state"], "stopped");
                break;
            }
            _ => {}
        }
    }
    assert_eq!(bars, (0..16).collect::<Vec<_>>());

    send(&mut ws, json!({"type": "save"})).await;
    assert_eq!(next(&mut ws).await, json!({"type": "ack", "command": "save"}));
    let saved = std::fs::read_to_string(dir.path().join("simple_dynamic_song.curves.json")).unwrap();
    let saved: Value = serde_json::from_str(&saved).unwrap();
    assert!(saved["energy"].as_array().unwrap().iter().any(|p| p == &json!([0.3, 0.8])));
}

#[tokio::test]
async fn pause_holds_the_playhead() {
    let dir = tempfile::tempdir().unwrap();
    copy_library(dir.path());
    // real time: one bar takes over a second, so nothing moves while paused
    let addr = start(dir.path(), 1.0).await;
    let made: Value = create(addr, json!({"song": "simple_dynamic_song"})).await.json().await.unwrap();
    let id = made["session"].as_str().unwrap().to_string();
    let mut ws = connect(addr, &id).await;

    send(&mut ws, json!({"type": "play"})).await;
    assert_eq!(next_of(&mut ws, "bar_boundary").await["bar"], 0);
    assert_eq!(next_of(&mut ws, "bar_boundary").await["bar"], 1);
    send(&mut ws, json!({"type": "pause"})).await;
    assert_eq!(next_of(&mut ws, "transport_changed").await["state"], "paused");

    // curve edits now land after the lookahead bar
    send(&mut ws, json!({"type": "curve_edit", "curve": "valence", "op": {"kind": "move", "index": 0, "point": [0.0, 1.0]}})).await;
    assert_eq!(next_of(&mut ws, "ack").await["effective_bar"], 2);

    let status: Value = reqwest::get(format!("http://{addr}/sessions/{id}")).await.unwrap().json().await.unwrap();
    assert_eq!(status["state"], "paused");
    assert_eq!(status["playhead_bar"], 0);
    assert_eq!(status["scheduled_horizon_bar"], 1);

    send(&mut ws, json!({"type": "stop"})).await;
    assert_eq!(next_of(&mut ws, "transport_changed").await["state"], "stopped");
}

#[tokio::test]
async fn sessions_are_isolated() {
    let dir = tempfile::tempdir().unwrap();
    copy_library(dir.path());
    let addr = start(dir.path(), 500.0).await;
    let mut logs = Vec::new();
    let mut sockets = Vec::new();
    for _ in 0..2 {
        let made: Value = create(addr, json!({"song": "simple_dynamic_song", "seed": 8}))
            .await
            .json()
            .await
            .unwrap();
        sockets.push(connect(addr, made["session"].as_str().unwrap()).await);
    }
    // edit only the first session, then play both
    send(&mut sockets[0], json!({"type": "curve_edit", "curve": "valence", "op": {"kind": "move", "index": 1, "point": [0.6, 0.0]}})).await;
    next_of(&mut sockets[0], "ack").await;
    for ws in sockets.iter_mut() {
        send(ws, json!({"type": "play"})).await;
    }
    for ws in sockets.iter_mut() {
        let mut log = Vec::new();
        next_of(ws, "transport_changed").await;
        loop {
            let v = next(ws).await;
            if v["type"] == "transport_changed" {
                break;
            }
            log.push(v);
        }
        logs.push(log);
    }
    assert_ne!(logs[0], logs[1]);

    // an unedited third session matches the in-process session exactly
    let made: Value = create(addr, json!({"song": "simple_dynamic_song", "seed": 8}))
        .await
        .json()
        .await
        .unwrap();
    let mut ws = connect(addr, made["session"].as_str().unwrap()).await;
    send(&mut ws, json!({"type": "play"})).await;
    next_of(&mut ws, "transport_changed").await;
    let mut remote = Vec::new();
    loop {
        let v = next(&mut ws).await;
        if v["type"] == "transport_changed" {
            break;
        }
        remote.push(v);
    }
    let reg = std::sync::Arc::new(default_registry());
    let lib = dynsong_transport::Library::new(dir.path());
    let graph = lib.song("simple_dynamic_song").unwrap().into_graph(&reg).unwrap();
    let curves = lib.curves("simple_dynamic_song").unwrap();
    let mut local = dynsong_transport::Session::new("l", graph, reg, curves, Some(8)).unwrap();
    let local: Vec<Value> = local
        .play_to_end()
        .unwrap()
        .into_iter()
        .filter(|e| !matches!(e, dynsong_transport::StreamEvent::TransportChanged { .. }))
        .map(|e| serde_json::to_value(e).unwrap())
        .collect();
    assert_eq!(remote, local);
}
