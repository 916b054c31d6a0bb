use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ltl-rl")).args(args).current_dir(root()).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small_config(dir: &Path, r_n: f64) -> PathBuf {
    let ws = root().join("configs/workspaces/example1.json");
    let cfg = serde_json::json!({
        "schema_version": 1,
        "name": "tiny",
        "formula": "F (a & F b)",
        "workspace": ws,
        "reward": {"r_g": 50.0, "r_n": r_n, "r_d": -5.0},
        "learner": {"warmup_steps": 20, "batch_size": 8, "actor_hidden": [8], "critic_hidden": [8]},
        "steps": 200,
        "max_episode_steps": {"random-q": 200, "fixed-q0": 200},
        "eval_max_steps": 50,
        "modes": ["random-q", "fixed-q0"],
        "seeds": [1],
        "eval_starts": {"count": 4, "seed": 3}
    });
    let path = dir.join(format!("tiny_{r_n}.json"));
    fs::write(&path, cfg.to_string()).unwrap();
    path
}

#[test]
fn translate_prints_and_writes_hoa() {
    let o = run(&["translate", "F (a & F b)"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("States: 3"));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("phi1.hoa");
    let o = run(&["translate", "F (a & F b)", "-o", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(fs::read_to_string(out).unwrap().starts_with("HOA: v1"));
}

#[test]
fn unsupported_formula_is_a_validation_error() {
    let o = run(&["translate", "X a"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    assert_eq!(run(&["translate", "F (a &"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn annotate_dumps_b_maps_and_traps() {
    let o = run(&["annotate", "crates/core/fixtures/phi3.hoa"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["b_maps"].is_array());
    assert!(v["traps"].is_array());
    assert_eq!(run(&["annotate", "crates/core/fixtures/none.hoa"]).status.code(), Some(1));
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), -0.1);
    let out = dir.path().join("run");
    let o = run(&["train", cfg.to_str().unwrap(), "--mode", "random-q", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["runs"].as_array().unwrap().len(), 1);
    assert_eq!(report["schema_version"], 1);
    let ckpt = out.join("random-q_seed1_checkpoint.json");
    let o = run(&["eval", ckpt.to_str().unwrap(), cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["starts"], 4);
    assert_eq!(v["success_rate"], report["runs"][0]["success_rate"]);
}

#[test]
fn invalid_reward_fails_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 0.0);
    let out = dir.path().join("run");
    let o = run(&["train", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("reward stage"));
    assert!(!out.join("report.json").exists());
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), -0.1);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = run(&["train", cfg.to_str().unwrap(), "--steps", "0", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_agrees_with_reachability() {
    let o = run(&["oracle", "crates/core/fixtures/grids/phi3_case2.json", "crates/core/fixtures/phi3.hoa"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["matches_ground_truth"], true);
    let o = run(&["oracle", "crates/core/fixtures/grids/phi3_case2.json", "crates/core/fixtures/phi1.hoa"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn plot_data_smooths_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    fs::write(&m, "step,episode,return,normalized_return,accepted,epsilon_used\n10,0,1,0,0,0\n20,1,3,1,1,0\n").unwrap();
    let o = run(&["plot-data", m.to_str().unwrap(), "--window", "2"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "# smoothing_window=2\nstep,smoothed_normalized_return\n10,0\n20,0.5\n");
    let o = run(&["plot-data", m.to_str().unwrap(), m.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(dir.path().join("m_plot.csv").exists());
}
