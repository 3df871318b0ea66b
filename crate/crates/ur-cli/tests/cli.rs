use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ur(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ur"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ur-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Exports the bundled assets and returns the asset root.
fn assets(name: &str) -> PathBuf {
    let dir = scratch(name);
    assert!(ur(&["bundled", "--out", s(&dir)]).status.success());
    dir
}

fn run_into(root: &Path, scenario: &str, out: &Path) -> Output {
    let scen = root.join("scenarios").join(format!("{scenario}.json"));
    let pol = root.join("policies/default.json");
    ur(&["run", "--scenario", s(&scen), "--policy", s(&pol), "--out", s(out)])
}

#[test]
fn run_is_reproducible_and_replay_verifies() {
    let root = assets("repro");
    let (a, b) = (root.join("a"), root.join("b"));
    let out = run_into(&root, "pda-missing-doppler", &a);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("pass"));
    assert_eq!(run_into(&root, "pda-missing-doppler", &b).status.code(), Some(0));
    for f in ["log.jsonl", "snapshot.json", "trace.json", "trace.txt"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }

    let log = a.join("log.jsonl");
    let snap = a.join("snapshot.json");
    let out = ur(&["replay", "--log", s(&log), "--verify-snapshot", s(&snap)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "snapshot identical");
    let out = ur(&["replay", "--log", s(&log)]);
    assert_eq!(out.stdout, std::fs::read(&snap).unwrap());

    let mut bytes = std::fs::read(&snap).unwrap();
    let i = bytes.iter().position(|b| *b == b'0').unwrap();
    bytes[i] = b'9';
    std::fs::write(&snap, &bytes).unwrap();
    let out = ur(&["replay", "--log", s(&log), "--verify-snapshot", s(&snap)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains(&format!("byte {i}")));
}

#[test]
fn diverging_trace_exits_one() {
    let root = assets("diverge");
    let path = root.join("scenarios/pda-missing-doppler.json");
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("\"dr-lee\""));
    std::fs::write(&path, text.replace("\"actor\": \"dr-lee\"", "\"actor\": \"dr-kim\"")).unwrap();
    let out_dir = root.join("out");
    let out = run_into(&root, "pda-missing-doppler", &out_dir);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trace mismatch"));
    assert!(out_dir.join("log.jsonl").exists());
}

#[test]
fn bad_inputs_exit_two() {
    let root = assets("invalid");
    let missing = root.join("nope.json");
    let pol = root.join("policies/default.json");
    let out = ur(&["run", "--scenario", s(&missing), "--policy", s(&pol)]);
    assert_eq!(out.status.code(), Some(2));

    let broken = root.join("scenarios/broken.json");
    std::fs::write(&broken, r#"{"name": "broken"}"#).unwrap();
    let out = ur(&["run", "--scenario", s(&broken), "--policy", s(&pol)]);
    assert_eq!(out.status.code(), Some(2));

    let bad_pol = root.join("bad-policy.json");
    std::fs::write(&bad_pol, "{}").unwrap();
    let scen = root.join("scenarios/empty.json");
    let out = ur(&["run", "--scenario", s(&scen), "--policy", s(&bad_pol)]);
    assert_eq!(out.status.code(), Some(2));

    let out = ur(&["replay", "--log", s(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    let garbage = root.join("garbage.jsonl");
    std::fs::write(&garbage, "not json\n").unwrap();
    assert_eq!(ur(&["replay", "--log", s(&garbage)]).status.code(), Some(2));
}

#[test]
fn serve_requires_tokens() {
    let root = assets("serve");
    let scen = root.join("scenarios/empty.json");
    let pol = root.join("policies/default.json");
    let out = Command::new(env!("CARGO_BIN_EXE_ur"))
        .args(["serve", "--scenario", s(&scen), "--policy", s(&pol), "--port", "0"])
        .env_remove("UR_TOKEN_FILE")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("token"));
}
