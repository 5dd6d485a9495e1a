//! End-to-end runs of the `hsj` binary: outputs and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hsj_core::corpus;
use hsj_core::trace::Trace;
use tempfile::TempDir;

fn hsj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsj")).args(args).output().expect("hsj runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_writes_csv_with_the_settled_value() {
    let dir = TempDir::new().unwrap();
    let src = write(&dir, "fig14a.hsj", corpus::program("fig12a").unwrap().source);
    let out = dir.path().join("trace.csv");
    let o = hsj(&["run", &src, "--wcrt", "2", "--ticks", "10", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("tick,time,entity,kind,value\n"));
    assert!(csv.contains("1,2,a,cont,2\n"), "{csv}");
    assert!(stdout(&o).contains("terminated at tick 1"));
}

#[test]
fn run_json_round_trips_and_svg_has_lanes() {
    let dir = TempDir::new().unwrap();
    let json = dir.path().join("t.json");
    let o = hsj(&["run", "corpus:fig14a", "--wcrt", "2", "--out", json.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let trace = Trace::from_json(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(trace.emissions("R"), [1]);

    let o = hsj(&["run", "corpus:fig14a", "--wcrt", "2", "--format", "svg", "--vars", "a,R"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("<svg"));
    let o = hsj(&["run", "corpus:fig14a", "--wcrt", "2", "--format", "svg", "--vars", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn schedules_drive_inputs_and_are_validated() {
    let dir = TempDir::new().unwrap();
    let good = write(&dir, "s.json", r#"[{"tick":1,"present":["FAULT"]}]"#);
    let o = hsj(&["run", "corpus:fig17a", "--wcrt", "2", "--ticks", "2", "--schedule", &good]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("2,4,a,cont,6\n"), "{}", stdout(&o));

    let valued = write(&dir, "v.json", r#"[{"tick":1,"values":{"FAULT":"1"}}]"#);
    let o = hsj(&["run", "corpus:fig17a", "--schedule", &valued]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("pure signal"));

    let unknown = write(&dir, "u.json", r#"[{"tick":1,"present":["NOPE"]}]"#);
    assert_eq!(hsj(&["run", "corpus:fig17a", "--schedule", &unknown]).status.code(), Some(2));
    let malformed = write(&dir, "m.json", "{");
    assert_eq!(hsj(&["run", "corpus:fig17a", "--schedule", &malformed]).status.code(), Some(2));
}

#[test]
fn verify_exit_codes() {
    let o = hsj(&["verify", "corpus:fig19a", "--wcrt", "2", "--param", "alpha=3", "--bound", "12", "--target", "ERROR"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("REACHABLE ERROR at tick 2"), "{}", stdout(&o));

    let o = hsj(&["verify", "corpus:fig19a", "--param", "alpha=1", "--bound", "30", "--target", "ERROR"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("UNREACHABLE"));

    let o = hsj(&[
        "verify", "corpus:fig19a", "--param", "alpha=1", "--bound", "30", "--target", "ERROR", "--node-limit", "3",
    ]);
    assert_eq!(o.status.code(), Some(3));

    let o = hsj(&["verify", "corpus:fig19a", "--bound", "5", "--target", "NOPE"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_with_an_alphabet_finds_the_fault() {
    let dir = TempDir::new().unwrap();
    let alphabet = write(&dir, "a.json", r#"{"FAULT":["absent","present"]}"#);
    let prog = write(
        &dir,
        "p.hsj",
        "input signal FAULT;\nsignal ALARM;\nloop { if (FAULT) emit ALARM; pause }\n",
    );
    let o = hsj(&["verify", &prog, "--bound", "4", "--target", "ALARM", "--alphabet", &alphabet, "--strategy", "dfs"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stdout(&o).contains("FAULT"));
}

#[test]
fn compile_and_usage_errors_exit_2_with_positions() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "garbage.hsj", "cont a = 0;\ndo {a' = 1} until (a <=\n");
    let o = hsj(&["check", &bad]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("garbage.hsj:"), "{err}");
    assert!(err.contains(":3:1") || err.contains(":2:"), "{err}");

    assert_eq!(hsj(&["check", "/no/such/file.hsj"]).status.code(), Some(2));
    assert_eq!(hsj(&["run", "corpus:fig12a", "--wcrt", "0"]).status.code(), Some(2));
    assert_eq!(hsj(&["run", "corpus:fig12a", "--param", "nope=1"]).status.code(), Some(2));
    assert_eq!(hsj(&["run", "corpus:fig12a", "--ticks", "0"]).status.code(), Some(2));
    assert_eq!(hsj(&["frobnicate"]).status.code(), Some(2));

    let times = write(&dir, "times.hsj", "cont a op* = 1;\ndo {a' = 1 || a' = 2} until (a <= 4)\n");
    assert_eq!(hsj(&["check", &times]).status.code(), Some(2));
}

#[test]
fn check_and_desugar() {
    let o = hsj(&["check", "corpus:fig17a"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("inputs: FAULT"));
    let o = hsj(&["desugar", "corpus:fig12a", "--wcrt", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("param WCRT = 2;") && text.contains("a = a + WCRT"), "{text}");
}

fn lti_file(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn lti_verdicts() {
    let dir = TempDir::new().unwrap();
    // a double integrator observed through its position
    let good = lti_file(dir.path(), "good.txt", "A 2 2\n1 1\n0 1\nC 1 2\n1 0\nB 2 1\n0\n1\n");
    let o = hsj(&["lti", &good]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("observability rank = 2 (observable: yes)"));
    assert!(stdout(&o).contains("controllability rank = 2 (controllable: yes)"));
    // observed through its velocity only
    let bad = lti_file(dir.path(), "bad.txt", "A 2 2\n1 1\n0 1\nC 1 2\n0 1\n");
    let o = hsj(&["lti", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("observability rank = 1"));
    let broken = lti_file(dir.path(), "broken.txt", "A 2 2\n1 1\n");
    assert_eq!(hsj(&["lti", &broken]).status.code(), Some(2));
}

#[test]
fn compare_reports_the_first_divergence() {
    let o = hsj(&[
        "compare", "--ha", "corpus:fig01b", "--program", "corpus:fig19a", "--wcrt", "2", "--horizon", "20", "--param",
        "alpha=3",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("first divergence: tick 2 (t = 4), x: program 2 vs automaton 4"), "{text}");
    assert!(text.contains("automaton: t = 9 B -> D (x=9 y=6)"), "{text}");
    assert!(text.contains("delayed automaton: t = 11 B -> D (x=11 y=6)"), "{text}");

    let dir = TempDir::new().unwrap();
    let map = write(&dir, "map.toml", "x = \"x\"\n");
    let o = hsj(&[
        "compare", "--ha", "corpus:fig01b", "--program", "corpus:fig19a", "--horizon", "12", "--param", "alpha=1",
        "--map", &map, "--format", "csv",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("tick,time,location,x.program,x.automaton\n"));

    let bad = write(&dir, "bad.toml", "z = \"x\"\n");
    let o = hsj(&["compare", "--ha", "corpus:fig01b", "--program", "corpus:fig19a", "--horizon", "4", "--map", &bad]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn corpus_listing_and_golden_run() {
    let o = hsj(&["corpus", "list"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("fig19a\tprogram\t19a 19b 19c 19d"));
    let o = hsj(&["corpus", "run"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("known-discrepancy\tfig13"));
    let o = hsj(&["corpus", "show", "fig12a"]);
    assert_eq!(stdout(&o), corpus::program("fig12a").unwrap().source);
}
