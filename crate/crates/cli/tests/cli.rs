use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surromip"))
        .args(args)
        .current_dir(dir)
        .env_remove("SURROMIP_FEASTOL")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const STUMP: &str = r#"{"kind":"tree","input_dim":1,"tree":{"split":{"feature":0,"threshold":0.5,"left":{"leaf":[1.0]},"right":{"leaf":[2.0]}}}}"#;

fn stump_model(dir: &Path, out: &str) {
    fs::write(dir.join("stump.json"), STUMP).unwrap();
    fs::write(dir.join("box.json"), "[[0, 1]]").unwrap();
    let o = run(
        &["formulate", "--predictor", "stump.json", "--input-bounds", "box.json", "--objective", "min", "--out", out],
        dir,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn stump_min_solves_to_one() {
    let dir = tempfile::tempdir().unwrap();
    for file in ["stump.lp", "stump.mps"] {
        stump_model(dir.path(), file);
        let o = run(&["solve", "--model", file, "--no-timing"], dir.path());
        assert_eq!(o.status.code(), Some(0));
        assert_eq!(stdout(&o).lines().next(), Some("optimal 1.0"));
    }
}

#[test]
fn solve_output_is_byte_stable_without_timing() {
    let dir = tempfile::tempdir().unwrap();
    stump_model(dir.path(), "m.lp");
    let a = run(&["solve", "--model", "m.lp", "--no-timing"], dir.path());
    let b = run(&["solve", "--model", "m.lp", "--no-timing"], dir.path());
    assert_eq!(a.stdout, b.stdout);
    assert!(!stdout(&a).contains("time"));
    let timed = run(&["solve", "--model", "m.lp"], dir.path());
    assert!(stdout(&timed).lines().last().unwrap().starts_with("time "));
    let j = run(&["solve", "--model", "m.lp", "--json", "--no-timing"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&j.stdout).unwrap();
    assert_eq!(v["status"], "optimal");
    assert_eq!(v["objective"], 1.0);
    assert!(v.get("seconds").is_none());
}

#[test]
fn generate_twice_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "generate", "--family", "water", "--params", "3", "--predictor-kind", "dt", "--predictor-params", "2",
        "--data-seed", "0", "--train-seed", "0", "--out-dir",
    ];
    let mut first = Vec::new();
    for sub in ["a", "b"] {
        let mut full: Vec<&str> = args.to_vec();
        full.push(sub);
        let o = run(&full, dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let mps = fs::read(dir.path().join(sub).join("water_3_dt_2_synth_0_0.mps")).unwrap();
        let manifest = fs::read(dir.path().join(sub).join("water_3_dt_2_synth_0_0.json")).unwrap();
        first.push((mps, manifest));
    }
    assert_eq!(first[0], first[1]);
    let manifest: serde_json::Value = serde_json::from_slice(&first[0].1).unwrap();
    assert_eq!(manifest["name"], "water_3_dt_2_synth_0_0.mps");
}

#[test]
fn verify_fabricated_gbdt_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["fabricate", "--kind", "gbdt", "--params", "3-2", "--inputs", "3", "--seed", "5", "--out", "g.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["verify", "--predictor", "g.json", "--samples", "200", "--seed", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("PASS"));
    let o = run(&["verify", "--predictor", "g.json", "--samples", "20", "--json"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["samples"].as_u64().unwrap() + v["boundary_skipped"].as_u64().unwrap(), 20);
}

#[test]
fn verify_failure_exits_four() {
    // A zero feasibility tolerance makes the off-by-10*feastol check vacuous, so the
    // shifted output is feasible and uniqueness fails.
    let dir = tempfile::tempdir().unwrap();
    run(&["fabricate", "--kind", "linear", "--inputs", "2", "--out", "l.json"], dir.path());
    let o = Command::new(env!("CARGO_BIN_EXE_surromip"))
        .args(["verify", "--predictor", "l.json", "--samples", "3"])
        .current_dir(dir.path())
        .env("SURROMIP_FEASTOL", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("FAIL"));
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["solve"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["solve", "--model", "missing.lp"], dir.path()).status.code(), Some(2));
    assert_eq!(
        run(&["generate", "--family", "nowhere", "--predictor-kind", "dt"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["generate", "--family", "wine", "--params", "3-2", "--predictor-kind", "dt"], dir.path()).status.code(),
        Some(2)
    );
    stump_model(dir.path(), "m.lp");
    let o = run(&["solve", "--model", "m.lp", "--max-nodes", "0", "--no-timing"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stdout(&o).lines().next(), Some("node_limit"));
    let o = Command::new(env!("CARGO_BIN_EXE_surromip"))
        .args(["solve", "--model", "m.lp"])
        .current_dir(dir.path())
        .env("SURROMIP_FEASTOL", "lots")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn formulate_rejects_bad_bounds_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("stump.json"), STUMP).unwrap();
    fs::write(dir.path().join("box.json"), "[[0, 1], [0, 1]]").unwrap();
    let o = run(&["formulate", "--predictor", "stump.json", "--input-bounds", "box.json", "--out", "x.lp"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("2 bounds for 1 inputs"));
}
