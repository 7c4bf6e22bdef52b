use futures_util::{SinkExt, StreamExt};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::Duration;
use tokio_tungstenite::tungstenite::Message;
use wheelsim_core::protocol::{decode, encode, Hello, WireMessage};
use wheelsim_core::{EndReason, SessionReport};

fn repo(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn wheelsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wheelsim"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn replay_full_forward(out: &PathBuf) -> SessionReport {
    let o = wheelsim(&[
        "replay",
        "--level",
        path(&repo("levels/straight_corridor.level.json")),
        "--trace",
        path(&repo("traces/full_forward.trace.jsonl")),
        "--calibration",
        path(&repo("traces/adc_10bit.calibration.json")),
        "--report",
        path(out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&std::fs::read(out).unwrap()).unwrap()
}

#[test]
fn replay_completes_straight_corridor() {
    let dir = tempfile::tempdir().unwrap();
    let report = replay_full_forward(&dir.path().join("r.json"));
    assert!(report.metrics.completed);
    assert_eq!(report.end_reason, EndReason::Completed);
    assert_eq!(
        report.canonical_sha256.as_deref(),
        Some(report.canonical_digest().as_str())
    );
}

#[test]
fn replay_twice_gives_identical_canonical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let a = replay_full_forward(&dir.path().join("a.json"));
    let b = replay_full_forward(&dir.path().join("b.json"));
    assert_eq!(a.canonical_json(), b.canonical_json());
    assert_eq!(a.canonical_sha256, b.canonical_sha256);
}

#[test]
fn report_replays_to_same_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let original = replay_full_forward(&first);
    let second = dir.path().join("second.json");
    let o = wheelsim(&[
        "replay",
        "--level",
        path(&repo("levels/straight_corridor.level.json")),
        "--from-report",
        path(&first),
        "--report",
        path(&second),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let again: SessionReport = serde_json::from_slice(&std::fs::read(second).unwrap()).unwrap();
    assert_eq!(again.canonical_json(), original.canonical_json());
}

#[test]
fn replay_timeout_exits_zero() {
    let o = wheelsim(&[
        "replay",
        "--level",
        path(&repo("levels/l_turn.level.json")),
        "--trace",
        path(&repo("traces/idle.trace.jsonl")),
        "--calibration",
        path(&repo("traces/adc_10bit.calibration.json")),
        "--max-duration",
        "20",
    ]);
    assert!(o.status.success());
    let report: SessionReport = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report.end_reason, EndReason::Timeout);
    assert_eq!(report.metrics.ticks, 1200);
}

#[test]
fn replay_input_errors_exit_two() {
    let level = repo("levels/straight_corridor.level.json");
    let trace = repo("traces/idle.trace.jsonl");
    let in_wall = fixture("start_in_wall.level.json");
    let cases: [Vec<&str>; 4] = [
        vec!["--level", "missing.level.json", "--trace", path(&trace)],
        vec!["--level", path(&level), "--trace", "missing.trace.jsonl"],
        // a level is not a calibration file
        vec![
            "--level",
            path(&level),
            "--trace",
            path(&trace),
            "--calibration",
            path(&level),
        ],
        vec!["--level", path(&in_wall), "--trace", path(&trace)],
    ];
    for case in cases {
        let mut args = vec!["replay"];
        args.extend(case.iter().copied());
        let o = wheelsim(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn validate_reports_problems() {
    let check = |p: PathBuf, code: i32, needle: &str| {
        let o = wheelsim(&["validate", "--level", path(&p)]);
        let out = String::from_utf8_lossy(&o.stdout);
        assert_eq!(o.status.code(), Some(code), "{out}");
        assert!(out.contains(needle), "{out}");
    };
    check(repo("levels/straight_corridor.level.json"), 0, "ok");
    check(fixture("low_contrast.level.json"), 1, "#777777");
    check(fixture("cluttered.level.json"), 1, "clutter");
    check(fixture("start_in_wall.level.json"), 1, "start collides");
    assert_eq!(
        wheelsim(&["validate", "--level", "missing.level.json"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn serve_rejects_bad_port() {
    for port in ["70000", "-1", "http"] {
        let o = wheelsim(&[
            "serve",
            "--port",
            port,
            "--level-dir",
            path(&repo("levels")),
        ]);
        assert_eq!(o.status.code(), Some(2), "{port}");
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn serve_answers_and_ends_sessions_on_sigint() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_wheelsim"))
        .args(["serve", "--port", "0"])
        .env("WHEELSIM_LEVEL_DIR", repo("levels"))
        .env("RUST_LOG", "warn")
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let base = line
        .trim()
        .strip_prefix("listening on http://")
        .unwrap()
        .to_string();

    let mut tcp = tokio::net::TcpStream::connect(&base).await.unwrap();
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    tcp.write_all(b"GET /levels HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut resp = String::new();
    tcp.read_to_string(&mut resp).await.unwrap();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    assert!(resp.contains("\"straight_corridor\""));

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{base}/session"))
        .await
        .unwrap();
    let hello = WireMessage::Hello(Hello {
        level_id: "slalom".into(),
        device_descriptor: None,
        calibration: None,
    });
    ws.send(Message::Text(encode(&hello).into())).await.unwrap();
    let mut welcomed = false;
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), ws.next())
            .await
            .unwrap()
            .unwrap()
            .unwrap();
        let Message::Text(text) = msg else { continue };
        match decode(&text).unwrap() {
            WireMessage::Welcome(_) => {
                welcomed = true;
                let kill = Command::new("kill")
                    .args(["-INT", &child.id().to_string()])
                    .status()
                    .unwrap();
                assert!(kill.success());
            }
            WireMessage::Frame(_) => {}
            WireMessage::Ended(e) => {
                assert_eq!(e.report.end_reason, EndReason::ServerShutdown);
                break;
            }
            other => panic!("{other:?}"),
        }
    }
    assert!(welcomed);
    drop(ws);
    let status = tokio::task::spawn_blocking(move || child.wait())
        .await
        .unwrap()
        .unwrap();
    assert!(status.success(), "{status}");
}
