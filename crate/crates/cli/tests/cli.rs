use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pbcast::graph::{generate, GeneratorKind, Topology};

fn pbcast(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pbcast"));
    cmd.args(args).env_remove("PBCAST_OUT");
    if let Some(dir) = out_env {
        cmd.env("PBCAST_OUT", dir);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn small_config(dir: &Path) -> String {
    write_config(
        dir,
        "small.json",
        r#"{
          "name": "small",
          "topology": { "generate": { "kind": "quadrangulation", "rings": 4, "sectors": 8 } },
          "placement": { "source": 0, "count": 2 },
          "strategy": { "name": "forge_flood", "forge_count": 8 },
          "policy": "random",
          "seeds": [4, 5, 6],
          "verifications": ["safety", "liveness", "time_bound", "correct_polygons"]
        }"#,
    )
}

const HEADER: &str =
    "seed,topology,n,d,Z,Y,D,strategy,delivered_fraction,max_delivery_time,peak_node_bits,verifications_passed";

#[test]
fn run_writes_summary_and_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out = dir.path().join("out");
    let o = pbcast(&["run", &config, "--out", out.to_str().unwrap(), "--jobs", "2"], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], HEADER);
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("4,"));
    assert!(lines[3].ends_with(",true"));
    for seed in [4, 5, 6] {
        assert!(out.join(format!("small-seed{seed}.jsonl")).exists());
    }
}

#[test]
fn summary_appends_without_repeating_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out = dir.path().join("out");
    for seed in ["4", "9"] {
        let o = pbcast(&["run", &config, "--out", out.to_str().unwrap(), "--seed", seed], None);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let csv = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| *l == HEADER).count(), 1);
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn same_config_same_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let rows = |name: &str| {
        let out = dir.path().join(name);
        assert_eq!(code(&pbcast(&["run", &config, "--out", out.to_str().unwrap()], None)), 0);
        std::fs::read(out.join("summary.csv")).unwrap()
    };
    assert_eq!(rows("a"), rows("b"));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let env_out = dir.path().join("env-out");
    let o = pbcast(&["run", &config, "--seed", "4"], Some(&env_out));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(env_out.join("summary.csv").exists());
}

#[test]
fn shipped_configs_pass() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["liveness.json", "torus.json"] {
        let config = configs().join(name);
        let o = pbcast(&["run", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], None);
        assert_eq!(code(&o), 0, "{name}: {}", stderr(&o));
    }
}

#[test]
fn failed_assertion_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // the channel bound does not survive a flooding neighbor
    let config = configs().join("memory.json");
    let o = pbcast(&["run", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--seed", "1"], None);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("memory_bound failed"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let malformed = write_config(dir.path(), "bad.json", "{ not json");
    assert_eq!(code(&pbcast(&["run", &malformed, "--out", out], None)), 2);
    let unknown =
        write_config(dir.path(), "unknown.json", r#"{"topology": {"generate": {"kind": "critical"}}, "colour": 1}"#);
    assert_eq!(code(&pbcast(&["run", &unknown, "--out", out], None)), 2);
    let both =
        write_config(dir.path(), "both.json", r#"{"topology": {"generate": {"kind": "critical"}, "file": "x.json"}}"#);
    assert_eq!(code(&pbcast(&["run", &both, "--out", out], None)), 2);
    let time_bound = write_config(
        dir.path(),
        "tb.json",
        r#"{"topology": {"generate": {"kind": "torus", "w": 6, "h": 6}}, "timing": {"mode": "unbounded_async"},
            "verifications": ["time_bound"]}"#,
    );
    let o = pbcast(&["run", &time_bound, "--out", out], None);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bounded timing"));
    assert_eq!(code(&pbcast(&["run", "/nonexistent/config.json"], None)), 2);
    assert_eq!(code(&pbcast(&["frobnicate"], None)), 2);
}

#[test]
fn infeasible_placement_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "far.json",
        r#"{"topology": {"generate": {"kind": "torus", "w": 6, "h": 6}},
            "placement": {"count": 2, "min_distance": 7}}"#,
    );
    let o = pbcast(&["run", &config, "--out", dir.path().join("o").to_str().unwrap()], None);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(!dir.path().join("o").exists(), "validation happens before any run");
}

#[test]
fn replay_fresh_tampered_and_old_format() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out = dir.path().join("out");
    assert_eq!(code(&pbcast(&["run", &config, "--out", out.to_str().unwrap(), "--seed", "5"], None)), 0);
    let transcript = out.join("small-seed5.jsonl");
    let path = transcript.to_str().unwrap();
    let o = pbcast(&["replay", path], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let text = std::fs::read_to_string(&transcript).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[2] = lines[2].replacen("\"t\":", "\"t\":7", 1);
    std::fs::write(&transcript, lines.join("\n")).unwrap();
    let o = pbcast(&["replay", path], None);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("first divergence at line 3"), "{}", stderr(&o));

    std::fs::write(&transcript, text.replacen("\"format\":1", "\"format\":99", 1)).unwrap();
    let o = pbcast(&["replay", path], None);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("format version 99"), "{}", stderr(&o));
}

#[test]
fn counterexample_is_deterministic_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = pbcast(&["counterexample", "--out", out.to_str().unwrap()], None);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for file in ["critical.json", "verdict.json", "critical-m0.jsonl", "critical-alt.jsonl"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
    let verdict: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(verdict["D"], 4);
    assert_eq!(verdict["Z"], 4);
    assert_eq!(verdict["indistinguishable"]["passed"], true);

    let o = pbcast(&["analyze", a.join("critical.json").to_str().unwrap(), "--json"], None);
    assert_eq!(code(&o), 0);
    let analysis: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(analysis["Z"], 4);
    assert_eq!(analysis["four_connected"], true);
    assert_eq!(analysis["n"], 21);
}

fn analyze_file(dir: &Path, topology: &Topology) -> serde_json::Value {
    let path = dir.join(format!("{}.json", topology.label()));
    topology.write(&path).unwrap();
    let o = pbcast(&["analyze", path.to_str().unwrap(), "--json"], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    serde_json::from_str(&stdout(&o)).unwrap()
}

#[test]
fn analyze_reports_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let octahedron = Topology::planar(
        "octahedron",
        vec![
            vec![4, 3, 2, 1],
            vec![0, 2, 5, 4],
            vec![0, 3, 5, 1],
            vec![0, 4, 5, 2],
            vec![0, 1, 5, 3],
            vec![1, 2, 3, 4],
        ],
    )
    .unwrap();
    let a = analyze_file(dir.path(), &octahedron);
    assert_eq!((a["Z"].as_u64(), a["Y"].as_u64()), (Some(3), Some(4)));
    assert_eq!(a["four_connected"], true);
    // eight triangles, one of them the outer face
    assert_eq!(a["polygons"], 7);

    let torus = generate(&GeneratorKind::Torus { w: 5, h: 5 }, 0).unwrap();
    let a = analyze_file(dir.path(), &torus);
    assert_eq!(a["planar"], false);
    assert_eq!(a["Z"], 4);

    // wheel: hub 0 and a rim of five, every rim node has degree 3
    let wheel = Topology::planar(
        "wheel",
        vec![vec![1, 2, 3, 4, 5], vec![0, 5, 2], vec![0, 1, 3], vec![0, 2, 4], vec![0, 3, 5], vec![0, 4, 1]],
    )
    .unwrap();
    let a = analyze_file(dir.path(), &wheel);
    assert_eq!(a["four_connected"], false);
    let cut: Vec<u32> = serde_json::from_value(a["cut"].clone()).unwrap();
    assert!(cut.len() < 4);
    assert!(!wheel.is_connected_without(&cut));

    let text = stdout(&pbcast(&["analyze", dir.path().join("wheel.json").to_str().unwrap()], None));
    assert!(text.contains("4-connected no, cut"));
}
