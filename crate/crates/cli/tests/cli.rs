use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn fogbid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fogbid"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn entries(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map(|rd| {
            rd.map(|e| e.unwrap().file_name().into_string().unwrap())
                .collect()
        })
        .unwrap_or_default();
    names.sort();
    names
}

/// Small overrides so sweeps finish quickly.
const QUICK: &str = "duration_ms = 2000\n";

#[test]
fn exp1_is_byte_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "quick.cfg", QUICK);
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let o = fogbid(&[
            "exp1",
            "--seed",
            "7",
            "--repetitions",
            "2",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(out.join("exp1-7.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    assert_eq!(text.lines().count(), 21);
    assert!(text.starts_with("value,edge_avg_exec_price,"));
}

#[test]
fn exp1_verification_point_and_exp2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "quick.cfg", QUICK);
    let out = tmp.path().to_str().unwrap();
    let o = fogbid(&[
        "exp1",
        "--with-5000",
        "--repetitions",
        "1",
        "--config",
        &cfg,
        "--out",
        out,
    ]);
    assert!(o.status.success());
    let csv = fs::read_to_string(tmp.path().join("exp1-1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 22);
    assert!(csv.lines().last().unwrap().starts_with("5000"));

    let o = fogbid(&[
        "exp2",
        "--seed",
        "42",
        "--repetitions",
        "1",
        "--config",
        &cfg,
        "--out",
        out,
    ]);
    assert!(o.status.success());
    let csv = fs::read_to_string(tmp.path().join("exp2-42.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
    assert!(csv.lines().nth(1).unwrap().starts_with("5,"));
    assert!(csv
        .lines()
        .all(|l| l.ends_with(",1") || l.ends_with("repetitions")));
}

#[test]
fn run_writes_records_and_summary() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "run.cfg",
        "duration_ms = 3000\nrequests_per_second_per_edge = 50\n",
    );
    let out = tmp.path().join("out");
    let o = fogbid(&[
        "run",
        "--config",
        &cfg,
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("requests 150"));
    let records = fs::read_to_string(out.join("run-5.records")).unwrap();
    assert!(records.starts_with("[config]\nseed = 5\n"));
    assert!(records.contains("\nrequests = 150\n"));
    assert_eq!(entries(&out), ["run-5.records"]);
}

#[test]
fn run_zero_width_latency_is_the_path_latency() {
    // nothing fits at the edge or intermediary, so every request takes 20 + 40 + 30 ms
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "zero.cfg",
        "processing_latency = 30,0\nedge_to_intermediary_latency = 20,0\n\
         intermediary_to_cloud_latency = 40,0\nexecutable_size = 10,0\n\
         edge_storage_capacity = 5\nintermediary_storage_capacity = 5\nduration_ms = 4000\n",
    );
    let o = fogbid(&[
        "run",
        "--config",
        &cfg,
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let records = fs::read_to_string(tmp.path().join("run-1.records")).unwrap();
    assert!(
        records.contains("\navg_latency_ms = 90.0000\n"),
        "{records}"
    );
}

#[test]
fn run_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "run.cfg",
        "duration_ms = 2000\nrequests_per_second_per_edge = 500\n",
    );
    let read = |dir: &str| {
        let out = tmp.path().join(dir);
        assert!(
            fogbid(&["run", "--config", &cfg, "--out", out.to_str().unwrap()])
                .status
                .success()
        );
        fs::read(out.join("run-1.records")).unwrap()
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn validate_reports_missing_cloud() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "nocloud.cfg",
        "node = edge,10,1,1\nnode = intermediary,100,5,0\n",
    );
    let o = fogbid(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8(o.stderr)
        .unwrap()
        .contains("no cloud node"));
    assert!(o.stdout.is_empty());

    let ok = write(tmp.path(), "empty.cfg", "");
    let o = fogbid(&["validate", "--config", &ok]);
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("valid"));
}

#[test]
fn config_errors_exit_3_and_write_nothing() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();
    let cases = [
        ("unknown.cfg", "seed = 1\nbogus_key = 3\n", "line 2"),
        (
            "negative.cfg",
            "processing_latency = 30,45\n",
            "processing_latency",
        ),
        ("syntax.cfg", "duration_ms 100\n", "line 1"),
    ];
    for (name, text, needle) in cases {
        let cfg = write(tmp.path(), name, text);
        for cmd in ["run", "exp1", "validate"] {
            let o = fogbid(&[cmd, "--config", &cfg, "--out", out]);
            assert_eq!(o.status.code(), Some(3), "{cmd} {name}");
            let stderr = String::from_utf8(o.stderr).unwrap();
            assert!(stderr.contains(needle), "{cmd} {name}: {stderr}");
        }
    }
    let o = fogbid(&[
        "run",
        "--config",
        tmp.path().join("missing.cfg").to_str().unwrap(),
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(entries(Path::new(out)).is_empty());
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["frobnicate"][..],
        &["run", "--bogus"],
        &[],
        &["run", "--seed", "x"],
    ] {
        let o = fogbid(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(o.stdout.is_empty());
    }
    let o = fogbid(&["--help"]);
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().contains("exp1"));
}

#[test]
fn unwritable_output_exits_4() {
    let tmp = TempDir::new().unwrap();
    let blocker = write(tmp.path(), "file", "");
    let cfg = write(
        tmp.path(),
        "quick.cfg",
        "duration_ms = 1000\nrequests_per_second_per_edge = 10\n",
    );
    let out = format!("{blocker}/sub");
    let o = fogbid(&["run", "--config", &cfg, "--out", &out]);
    assert_eq!(o.status.code(), Some(4));
    assert!(o.stdout.is_empty());
}
