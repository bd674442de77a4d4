use std::path::Path;
use std::process::Command;

fn guiagent(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_guiagent"))
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn workspace_file(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
        .to_string_lossy()
        .into_owned()
}

#[test]
fn mix_writes_a_seeded_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let spec = workspace_file("configs/mathinstruct_150k.toml");
    let out = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let a = guiagent(&["mix", "--spec", &spec, "--seed", "5", "--out", &out("a")]);
    assert!(a.contains("|A| 206062, |B| 56062"), "{a}");
    guiagent(&["mix", "--spec", &spec, "--seed", "5", "--out", &out("b")]);
    guiagent(&["mix", "--spec", "mathinstruct_150k", "--seed", "6", "--out", &out("c")]);
    let read = |d: &str| std::fs::read(dir.path().join(d).join("manifest.jsonl")).unwrap();
    assert!(read("a") == read("b"));
    assert!(read("a") != read("c"));
    assert!(dir.path().join("a/schedule.json").is_file());
}

#[test]
fn eval_and_parse_action() {
    let dir = tempfile::tempdir().unwrap();
    let out = guiagent(&["eval", "--task", "enable_wifi", "--out", dir.path().to_str().unwrap()]);
    assert!(out.contains("SR 100.0  PR 100.0"), "{out}");
    assert!(dir.path().join("report.json").is_file());
    let parsed = guiagent(&["parse-action", "Click [coordinate_x 0.12]  [coordinate_y 0.07]"]);
    assert_eq!(parsed.lines().next(), Some("click [[0.12] [0.07]]"));
    let bad = Command::new(env!("CARGO_BIN_EXE_guiagent"))
        .args(["parse-action", "clack"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
}
