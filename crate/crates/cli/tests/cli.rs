use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn groupauth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_groupauth"))
        .args(args)
        .output()
        .unwrap()
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn setup_reproduces_the_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = groupauth(&[
        "setup", "--t", "2", "--n", "3", "--p", "13", "--seed", "28", "--out", out,
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("seed: 28\n"));
    for (i, y) in [(1, 8), (2, 11), (3, 1)] {
        let tok = fs::read_to_string(dir.path().join(format!("token-M{i}.toml"))).unwrap();
        assert_eq!(tok, format!("user_id = {i}\nx = {i}\ny = {y}\np = 13\n"));
    }
    let public = fs::read_to_string(dir.path().join("group.toml")).unwrap();
    assert!(!public.contains("y ="));
    assert!(public.contains(
        "commitment = \"646c3f5ae2248f00f244e3f9d047497a151c08ad70399c5fbf80fcb68d098556\""
    ));
}

#[test]
fn setup_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = groupauth(&[
            "setup",
            "--t",
            "3",
            "--n",
            "5",
            "--seed",
            "7",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    for name in ["group.toml", "token-M1.toml", "token-M5.toml"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap()
        );
    }
    let t1 = fs::read_to_string(a.path().join("token-M1.toml")).unwrap();
    let t2 = fs::read_to_string(a.path().join("token-M2.toml")).unwrap();
    assert_ne!(t1, t2);
}

#[test]
fn setup_rejects_bad_params() {
    let dir = tempfile::tempdir().unwrap();
    let o = groupauth(&[
        "setup",
        "--t",
        "3",
        "--n",
        "3",
        "--p",
        "13",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = groupauth(&[
        "setup",
        "--t",
        "2",
        "--n",
        "3",
        "--p",
        "12",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn honest_p2_is_accepted() {
    let o = groupauth(&[
        "run",
        "--scenario",
        scenario("p2-honest.toml").to_str().unwrap(),
        "--seed",
        "23",
    ]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.starts_with("seed: 23\n"));
    assert!(text.contains("ACCEPTED"));
    assert!(text.contains("monte-carlo"));
}

#[test]
fn exhaustive_forger_is_rejected_12_of_13() {
    let o = groupauth(&[
        "run",
        "--scenario",
        scenario("p2-forger-exhaustive.toml").to_str().unwrap(),
    ]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(1), "{text}");
    assert!(text.contains("REJECTED 12/13"), "{text}");
}

#[test]
fn run_writes_a_reproducible_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("p2-replay.toml");
    let paths: Vec<_> = ["a.jsonl", "b.jsonl"]
        .iter()
        .map(|n| dir.path().join(n))
        .collect();
    for p in &paths {
        groupauth(&[
            "run",
            "--scenario",
            sc.to_str().unwrap(),
            "--out",
            p.to_str().unwrap(),
        ]);
    }
    let a = fs::read(&paths[0]).unwrap();
    assert_eq!(a, fs::read(&paths[1]).unwrap());
    assert!(a.starts_with(b"{\"type\":\"header\",\"schema\":\"gas-transcript/1\""));

    let shown = groupauth(&["show-transcript", paths[0].to_str().unwrap()]);
    assert!(shown.status.success());
    assert!(stdout(&shown).contains("summary (monte-carlo)"));
    let raw = groupauth(&[
        "show-transcript",
        paths[0].to_str().unwrap(),
        "--format",
        "records",
    ]);
    assert_eq!(raw.stdout, a);
}

#[test]
fn records_format_prints_the_transcript() {
    let o = groupauth(&[
        "run",
        "--scenario",
        scenario("p1-honest.toml").to_str().unwrap(),
        "--format",
        "records",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().all(|l| l.starts_with("{\"type\":")));
    assert!(text
        .lines()
        .last()
        .unwrap()
        .contains("\"type\":\"summary\""));
}

#[test]
fn malformed_scenario_exits_2_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "protocol = \"p2\"\nseed = 1\nbogus = 3\n").unwrap();
    let o = groupauth(&["run", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn invalid_roster_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.toml");
    fs::write(
        &path,
        "protocol = \"p1\"\nseed = 1\n[group]\np = 13\nt = 2\nn = 4\n[[seat]]\nhonest = 1\n",
    )
    .unwrap();
    let o = groupauth(&["run", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("roster"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(groupauth(&["run", "--bogus"]).status.code(), Some(2));
    assert_eq!(groupauth(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        groupauth(&["run", "--scenario", "x.toml", "--format", "xml"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        groupauth(&["show-transcript", "/nonexistent.jsonl"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn shipped_scenarios_all_parse_and_run() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let o = groupauth(&["run", "--scenario", path.to_str().unwrap()]);
        assert!(
            matches!(o.status.code(), Some(0 | 1)),
            "{}: {}",
            path.display(),
            String::from_utf8_lossy(&o.stderr)
        );
        seen += 1;
    }
    assert!(seen >= 5);
}

#[test]
fn verify_claims_passes() {
    let o = groupauth(&["verify-claims"]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 10);
}
