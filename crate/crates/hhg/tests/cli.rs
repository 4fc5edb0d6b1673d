use std::path::Path;
use std::process::{Command, Output};

fn hhg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hhg")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn diagnostics_writes_outputs_and_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = hhg(&["diagnostics", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let head = std::fs::read_to_string(dir.path().join("diagnostics_path.csv")).unwrap();
    assert!(head.starts_with("s,re_t,im_t,re_q,im_q,re_p,im_p,sheet_index\n"));
    let resolved = std::fs::read_to_string(dir.path().join("resolved_config.toml")).unwrap();
    assert!(resolved.contains("[quantum]"));
    let closure = std::fs::read_to_string(dir.path().join("diagnostics_closure.csv")).unwrap();
    assert_eq!(closure.lines().count(), 4);
}

#[test]
fn shipped_config_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/paper.toml");
    let out = hhg(&["diagnostics", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(hhg(&["spectrum", "--bogus"]).status.code(), Some(2));
    assert_eq!(hhg(&["spectrum", "--quantum-only", "--finco-only"]).status.code(), Some(2));
    assert_eq!(hhg(&["spectrum", "--threads", "0"]).status.code(), Some(2));
    assert_eq!(hhg(&[]).status.code(), Some(2));
}

#[test]
fn config_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    assert_eq!(hhg(&["diagnostics", "--config", path(&missing)]).status.code(), Some(3));
    for text in ["[field]\nf0 = -1.0\n", "[field]\nstrength = 1.0\n", "not toml ["] {
        let cfg = dir.path().join("bad.toml");
        std::fs::write(&cfg, text).unwrap();
        let out = hhg(&["diagnostics", "--config", path(&cfg), "--out", path(dir.path())]);
        assert_eq!(out.status.code(), Some(3), "{text}");
    }
}

#[test]
fn unwritable_output_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("file");
    std::fs::write(&file, "").unwrap();
    let out = hhg(&["diagnostics", "--out", path(&file.join("sub"))]);
    assert_eq!(out.status.code(), Some(5));
}
