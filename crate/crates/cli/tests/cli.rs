use std::path::Path;
use std::process::{Command, Output};

fn bsgrowth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsgrowth")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn lists_builtins() {
    let o = bsgrowth(&["group", "list"]);
    assert!(o.status.success());
    let names: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(names, ["octagon-genus2", "schottky-rank2", "punctured-torus-ideal-square"]);
}

#[test]
fn shown_spec_validates_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    let o = bsgrowth(&["group", "show", "--group", "octagon-genus2"]);
    assert!(o.status.success());
    std::fs::write(&path, &o.stdout).unwrap();
    let o = bsgrowth(&["group", "validate", "--group", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn invalid_groups_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    let o = bsgrowth(&["group", "show", "--group", "schottky-rank2"]);
    let mut spec: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    spec["pairing"] = serde_json::json!([[1, 1], [3, 7]]);
    std::fs::write(&path, spec.to_string()).unwrap();
    let o = bsgrowth(&["group", "validate", "--group", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(&path, "{").unwrap();
    let o = bsgrowth(&["group", "validate", "--group", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = bsgrowth(&["group", "validate", "--group", "no-such-group"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_arguments_are_usage_errors() {
    let o = bsgrowth(&["thermo", "pressure", "--beta", "1:x:3"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bsgrowth(&["ldp", "run", "--interval", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn expansion_prints_one_based_letters() {
    let o = bsgrowth(&["bs", "expand", "--group", "octagon-genus2", "--point", "0.3", "--depth", "12"]);
    assert!(o.status.success());
    let line = stdout(&o);
    let letters: Vec<usize> = line.split_whitespace().map(|t| t.parse().unwrap()).collect();
    assert_eq!(letters.len(), 12);
    assert!(letters.iter().all(|&l| (1..=8).contains(&l)));
    assert_eq!(stdout(&bsgrowth(&["bs", "expand", "--group", "octagon-genus2", "--point", "0.3", "--depth", "12"])), line);
}

#[test]
fn markov_dump_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = bsgrowth(&["markov", "dump", "--group", "punctured-torus-ideal-square", "--out", out]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("20 cells, cusp level 3"));
    let csv = std::fs::read_to_string(Path::new(out).join("markov.csv")).unwrap();
    assert!(csv.lines().count() > 20);
}
