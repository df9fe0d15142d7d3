use std::path::PathBuf;
use std::io::{BufRead, BufReader};
use std::process::{Command, Stdio};

use touchlink_core::session::ServeClient;
use touchlink_core::RasterDump;

fn touchlink() -> Command {
    Command::new(env!("CARGO_BIN_EXE_touchlink"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn stdout(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn hash_line(s: &str) -> String {
    s.lines().find(|l| l.starts_with("sha256 ")).unwrap().to_string()
}

#[test]
fn simulate_writes_a_reproducible_trace() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let path = dir.path().join(name);
        let s = stdout(touchlink().args(["simulate", "--scenario"]).arg(scenario("high_five.toml")).arg("--trace").arg(&path).args(["--seed", seed]));
        (s, std::fs::read_to_string(path).unwrap())
    };
    let (a, trace_a) = run("a.jsonl", "7");
    let (b, trace_b) = run("b.jsonl", "7");
    assert_eq!(hash_line(&a), hash_line(&b));
    assert_eq!(trace_a, trace_b);
    assert!(a.contains("touches 2"), "{a}");
    assert!(trace_a.lines().all(|l| l.starts_with('{')));
}

#[test]
fn seed_flag_reaches_lossy_links() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str| {
        hash_line(&stdout(
            touchlink()
                .args(["simulate", "--scenario"])
                .arg(scenario("lossy_wave.toml"))
                .arg("--trace")
                .arg(dir.path().join(format!("{seed}.jsonl")))
                .args(["--seed", seed]),
        ))
    };
    assert_ne!(run("1"), run("2"));
}

#[test]
fn render_frame_writes_png_and_raster() {
    let dir = tempfile::tempdir().unwrap();
    let png = dir.path().join("frame.png");
    let raw = dir.path().join("frame.raster");
    for out in [&png, &raw] {
        stdout(
            touchlink()
                .args(["render-frame", "--scenario"])
                .arg(scenario("one_sided.toml"))
                .args(["--t", "1500", "--site", "b", "--out"])
                .arg(out),
        );
    }
    assert_eq!(&std::fs::read(&png).unwrap()[..8], b"\x89PNG\r\n\x1a\n");
    let dump = RasterDump::read_from(std::fs::File::open(&raw).unwrap()).unwrap();
    assert_eq!((dump.width, dump.height), (320, 240));
    assert!(dump.channel("g").is_some());
}

#[test]
fn calibrate_prints_the_fit() {
    let out = stdout(touchlink().args(["calibrate", "--config"]).arg(scenario("site_a.toml")));
    let rmse: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("rmse "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(rmse < 0.003, "{out}");
    assert!(out.contains("translation [0.05"), "{out}");
}

#[test]
fn bad_input_fails_cleanly() {
    let out = touchlink()
        .args(["simulate", "--scenario", "/nonexistent.toml", "--trace", "/tmp/x.jsonl"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert!(!touchlink().args(["render-frame"]).output().unwrap().status.success());
}

#[test]
fn bench_reports_the_median() {
    let out = stdout(touchlink().args(["bench", "--frames", "20"]));
    assert!(out.contains("frames 20"), "{out}");
    assert!(out.lines().any(|l| l.starts_with("median ")));
}

#[test]
fn serve_accepts_a_client() {
    let mut child = touchlink()
        .args(["serve", "--port", "0", "--config"])
        .arg(scenario("serve.toml"))
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ws://").expect("listening line").parse().unwrap();
    let client = ServeClient::connect(addr);
    child.kill().unwrap();
    let _ = child.wait();
    let client = client.unwrap();
    assert!(client.reply.accepted);
    assert_eq!((client.reply.width, client.reply.height), (320, 240));
}
