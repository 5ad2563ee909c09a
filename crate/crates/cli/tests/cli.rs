use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use racil_core::demos::load_demos;
use racil_core::train::{read_metrics, Checkpoint, TrainConfig};
use racil_cli::session::read_trajectory;

const SMALL: &str = "# small run\nhidden_units = 16\nnum_layers = 2\ndisc_hidden_units = 16\nbuffer_size = 256\nbatch_size = 64\n\
total_steps = 1024\nsteps_bc = 256\nn_rays = 5\nmax_episode_steps = 1500\neval_interval = 512\nseed = 7\n";

fn racil(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_racil")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = racil(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
    demos: PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let config = root.join("small.cfg");
    std::fs::write(&config, SMALL).unwrap();
    let demos = root.join("expert.racildemo");
    ok(&["gen-demos", "--config", s(&config), "--episodes", "4", "--out", s(&demos), "--seed", "3"]);
    Fixture { _dir: dir, root, config, demos }
}

fn train_into(f: &Fixture, name: &str) -> PathBuf {
    let out = f.root.join(name);
    ok(&["train", "--config", s(&f.config), "--demos", s(&f.demos), "--out", s(&out)]);
    out
}

#[test]
fn gen_demos_writes_a_loadable_file() {
    let f = fixture();
    let cfg = TrainConfig::parse(SMALL).unwrap();
    let data = load_demos(&f.demos, &cfg.observation(), &cfg.env).unwrap();
    assert!(!data.is_empty());
    assert_eq!(data.observation(0).len(), cfg.observation().dim());
}

#[test]
fn train_and_eval_are_reproducible() {
    let f = fixture();
    let a = train_into(&f, "a");
    let b = train_into(&f, "b");
    for file in ["metrics.csv", "checkpoint.json", "config.cfg"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
    let rows = read_metrics(&a.join("metrics.csv")).unwrap();
    assert_eq!(rows.last().unwrap().step, 1024);
    let reloaded = TrainConfig::parse(&std::fs::read_to_string(a.join("config.cfg")).unwrap()).unwrap();
    assert_eq!(reloaded, TrainConfig::parse(SMALL).unwrap());

    let eval = |ck: &Path| ok(&["eval", "--checkpoint", s(&ck.join("checkpoint.json")), "--episodes", "20", "--seed", "5"]);
    let ta = eval(&a);
    assert_eq!(ta, eval(&b));
    let (table, rows) = ta.split_once("\n\n").unwrap();
    assert!(table.contains("uav1"), "{table}");
    assert!(rows.starts_with("agent,episodes,success_rate"), "{rows}");
}

#[test]
fn eval_rejects_a_mismatched_sensor() {
    let f = fixture();
    let a = train_into(&f, "a");
    let other = f.root.join("other.cfg");
    std::fs::write(&other, SMALL.replace("n_rays = 5", "n_rays = 9")).unwrap();
    let out = racil(&["eval", "--checkpoint", s(&a.join("checkpoint.json")), "--config", s(&other), "--episodes", "2"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("digest"), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(Checkpoint::load(&a.join("checkpoint.json")).is_ok());
}

#[test]
fn unknown_config_keys_are_reported_with_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "seed = 1\nlearning_rat = 0.1\n").unwrap();
    let out = racil(&["train", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("learning_rat"), "{err}");
}

#[test]
fn training_with_imitation_needs_demos() {
    let dir = tempfile::tempdir().unwrap();
    let out = racil(&["train", "--set", "total_steps=512", "--set", "steps_bc=256", "--out", s(&dir.path().join("o"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--demos"));
}

#[test]
fn eval_trajectory_round_trips_through_replay() {
    let f = fixture();
    let a = train_into(&f, "a");
    let traj = f.root.join("episode.jsonl");
    ok(&["eval", "--checkpoint", s(&a.join("checkpoint.json")), "--episodes", "1", "--trajectory", s(&traj)]);
    let frames = read_trajectory(&traj).unwrap();
    assert!(frames.last().unwrap().done);
    let summary = ok(&["replay", "--trajectory", s(&traj)]);
    assert!(summary.contains(&format!("frames {}", frames.len())), "{summary}");

    let text = std::fs::read_to_string(&traj).unwrap();
    let gapped: Vec<&str> = text.lines().enumerate().filter(|(i, _)| *i != 1).map(|(_, l)| l).collect();
    std::fs::write(&traj, gapped.join("\n")).unwrap();
    let out = racil(&["replay", "--trajectory", s(&traj)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("expected tick 1"));
}
