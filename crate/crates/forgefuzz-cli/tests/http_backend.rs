//! The HTTP forge adapter against a minimal in-process forge service
//! wrapping the simulator: a replay through the wire must match a direct
//! simulator replay.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::Command;
use std::sync::{Arc, Mutex};

use forgefuzz::simforge::{ForgeOp, SimForge};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_forgefuzz")
}

fn data(file: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(file)
        .display()
        .to_string()
}

/// Serves the wire protocol over HTTP/1.1, one request per connection.
fn serve(listener: TcpListener, forge: Arc<Mutex<SimForge>>) {
    for stream in listener.incoming() {
        let Ok(stream) = stream else { break };
        if handle(stream, &forge).is_err() {
            break;
        }
    }
}

fn handle(mut stream: TcpStream, forge: &Arc<Mutex<SimForge>>) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            content_length = v.trim().parse().unwrap_or(0);
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;

    let reply = if request_line.starts_with("POST /op") {
        let op: ForgeOp = serde_json::from_slice(&body).expect("valid op body");
        let (result, _cost) = forge.lock().unwrap().apply(&op);
        match result {
            Ok(response) => serde_json::json!({ "status": "ok", "response": response }),
            Err(error) => serde_json::json!({ "status": "error", "error": error }),
        }
    } else if request_line.starts_with("GET /metrics") {
        use forgefuzz::replay::ForgeClient;
        let metrics = forge.lock().unwrap().snapshot_metrics().unwrap();
        serde_json::to_value(metrics).unwrap()
    } else {
        serde_json::json!({ "status": "error", "error": { "error": "backend", "0": "bad route" } })
    };
    let payload = serde_json::to_vec(&reply).unwrap();
    write!(
        stream,
        "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        payload.len()
    )?;
    stream.write_all(&payload)?;
    stream.flush()
}

#[test]
fn http_replay_matches_sim_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |name: &str| tmp.path().join(name).display().to_string();

    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let forge = Arc::new(Mutex::new(SimForge::new()));
    let server = {
        let forge = forge.clone();
        std::thread::spawn(move || serve(listener, forge))
    };

    let status = Command::new(bin())
        .args([
            "ingest",
            &data("sample_events.jsonl"),
            "--out",
            &p("edges.csv"),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let edges = p("edges.csv");
    let corpus = data("commit_corpus.txt");
    let run_replay = |backend: &[&str], report: &str| {
        let mut args: Vec<&str> = vec![
            "replay", &edges, "--order", "listed", "--seed", "11", "--corpus", &corpus,
        ];
        args.extend_from_slice(backend);
        args.extend_from_slice(&["--report", report]);
        let out = Command::new(bin()).args(&args).output().unwrap();
        assert!(
            out.status.success(),
            "replay failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    };

    let base_url = format!("http://{addr}");
    run_replay(
        &["--backend", "http", "--base-url", &base_url],
        &p("http.json"),
    );
    run_replay(
        &["--backend", "sim", "--follow-limit", "300"],
        &p("sim.json"),
    );

    let http_report = fs::read_to_string(p("http.json")).unwrap();
    let sim_report = fs::read_to_string(p("sim.json")).unwrap();
    assert_eq!(
        http_report, sim_report,
        "wire and in-process replays diverged"
    );

    // server kept its own full request log
    let total_requests = forge.lock().unwrap().request_log().len();
    assert!(total_requests > 0);

    drop(server); // listener thread exits with the process
}

#[test]
fn http_backend_requires_base_url() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |name: &str| tmp.path().join(name).display().to_string();
    let status = Command::new(bin())
        .args([
            "ingest",
            &data("sample_events.jsonl"),
            "--out",
            &p("edges.csv"),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(bin())
        .args([
            "replay",
            &p("edges.csv"),
            "--backend",
            "http",
            "--report",
            &p("r.json"),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--base-url"));
}
