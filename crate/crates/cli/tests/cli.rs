use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn dynkc(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dynkc"));
    cmd.args(args)
        .env_remove("DYNKC_SEED")
        .env_remove("RUST_LOG");
    cmd
}

fn run(args: &[&str]) -> Output {
    dynkc(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

#[test]
fn help_and_version_exit_zero() {
    for flag in ["--help", "--version"] {
        assert_eq!(run(&[flag]).status.code(), Some(0), "{flag}");
    }
    let help = stdout(&run(&["--help"]));
    for sub in ["generate", "run", "validate", "aggregate"] {
        assert!(help.contains(sub), "help lists {sub}");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["run", "--mode", "heap"]).status.code(), Some(1));
    let dir = TempDir::new().unwrap();
    let out = path(dir.path());
    let bad_eps = run(&[
        "run",
        "--random",
        "--seeds",
        "2",
        "--per",
        "5",
        "--epsilon",
        "0",
        "--out",
        out,
    ]);
    assert_eq!(bad_eps.status.code(), Some(1));
    let no_input = run(&["validate", "--epsilon", "1"]);
    assert_eq!(no_input.status.code(), Some(1));
}

#[test]
fn missing_and_malformed_files_exit_three() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.csv");
    let o = run(&[
        "validate",
        "--points",
        path(&missing),
        "--epsilon",
        "1",
        "--k",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "0.5,0.5\n1.0,oops\n").unwrap();
    let o = run(&[
        "validate",
        "--points",
        path(&bad),
        "--epsilon",
        "1",
        "--k",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    let trace = dir.path().join("t.txt");
    fs::write(&trace, "#seed 1\n+ 0 1 1\n* what\n").unwrap();
    let o = run(&[
        "validate",
        "--trace-file",
        path(&trace),
        "--epsilon",
        "1",
        "--k",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn generate_is_reproducible_and_seed_env_wins() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let c = TempDir::new().unwrap();
    let gen = |dir: &Path, seed: &str, env: Option<&str>| {
        let mut cmd = dynkc(&[
            "generate",
            "--random",
            "--seeds",
            "5",
            "--per",
            "40",
            "--seed",
            seed,
            "--trace",
            "mix",
            "--out",
            path(dir),
        ]);
        if let Some(v) = env {
            cmd.env("DYNKC_SEED", v);
        }
        let o = cmd.output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        o
    };
    gen(a.path(), "9", None);
    let o = gen(b.path(), "1", Some("9"));
    assert!(stdout(&o).contains("seed 9"));
    gen(c.path(), "10", None);
    for file in ["points.csv", "trace.txt"] {
        let x = fs::read(a.path().join(file)).unwrap();
        assert_eq!(x, fs::read(b.path().join(file)).unwrap(), "{file}");
        assert_ne!(x, fs::read(c.path().join(file)).unwrap(), "{file}");
    }
    let points = fs::read_to_string(a.path().join("points.csv")).unwrap();
    assert_eq!(points.lines().count(), 200);
}

#[test]
fn desk_scale_dataset_has_20k_points() {
    let dir = TempDir::new().unwrap();
    let o = run(&["generate", "--random", "--out", path(dir.path())]);
    assert!(o.status.success());
    let points = fs::read_to_string(dir.path().join("points.csv")).unwrap();
    assert_eq!(points.lines().count(), 20_000);
}

#[test]
fn validate_passes_on_small_traces() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "#seed 0\n").unwrap();
    let o = run(&[
        "validate",
        "--trace-file",
        path(&empty),
        "--epsilon",
        "1",
        "--k",
        "3",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for mode in ["list", "tree"] {
        let o = run(&[
            "validate",
            "--random",
            "--seeds",
            "4",
            "--per",
            "15",
            "--window",
            "25",
            "--query-every",
            "5",
            "--epsilon",
            "0.5,4",
            "--k",
            "1,3",
            "--mode",
            mode,
        ]);
        assert_eq!(o.status.code(), Some(0), "{mode}: {}", stdout(&o));
        assert_eq!(stdout(&o).matches("no violations").count(), 2);
    }
}

#[test]
fn injected_fault_exits_two() {
    let o = run(&[
        "validate",
        "--random",
        "--seeds",
        "3",
        "--per",
        "10",
        "--window",
        "12",
        "--epsilon",
        "1",
        "--k",
        "2",
        "--inject-fault",
        "15",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let text = stdout(&o);
    assert!(text.contains("FAILED after event 15"), "{text}");
    assert!(text.contains("counter"), "{text}");
}

#[test]
fn run_writes_runs_and_aggregate_rebuilds_it() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "run",
        "--random",
        "--seeds",
        "6",
        "--per",
        "50",
        "--window",
        "100",
        "--query-every",
        "20",
        "--epsilon",
        "1,4",
        "--k",
        "2,5",
        "--mode",
        "tree",
        "--repeats",
        "2",
        "--compare-gonzalez",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let runs: Vec<_> = fs::read_dir(out.join("runs")).unwrap().collect();
    assert_eq!(runs.len(), 2 * 2 * 2);
    let tables = fs::read_to_string(out.join("tables.md")).unwrap();
    assert!(
        tables.contains("eps=1") && tables.contains("| 5 |"),
        "{tables}"
    );

    let again = dir.path().join("again");
    let o = run(&[
        "aggregate",
        "--runs",
        path(&out.join("runs")),
        "--out",
        path(&again),
    ]);
    assert!(o.status.success());
    let first: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("aggregate.json")).unwrap()).unwrap();
    let second: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(again.join("aggregate.json")).unwrap()).unwrap();
    assert_eq!(first, second);
    let cells = first.as_array().unwrap();
    assert_eq!(cells.len(), 4);
    for cell in cells {
        let eps = cell["epsilon"].as_f64().unwrap();
        let ratio = cell["phi_ratio"].as_f64().unwrap();
        assert!(ratio <= 2.0 + eps, "{cell}");
    }
}

#[test]
fn run_accepts_a_points_file_and_trace_file() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("pts.csv");
    let body: String = (0..60).map(|i| format!("{},{}\n", i % 7, i / 7)).collect();
    fs::write(&csv, body).unwrap();
    let o = run(&[
        "generate",
        "--points",
        path(&csv),
        "--trace",
        "sliding",
        "--window",
        "20",
        "--query-every",
        "10",
        "--out",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = dir.path().join("trace.txt");
    let out = dir.path().join("out");
    let o = run(&[
        "run",
        "--trace-file",
        path(&trace),
        "--epsilon",
        "0.5",
        "--k",
        "3",
        "--repeats",
        "1",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run_file = out.join("runs").join("list_eps0.5_k3_r0.json");
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_file).unwrap()).unwrap();
    assert_eq!(m["phi"].as_array().unwrap().len(), 6);
}
