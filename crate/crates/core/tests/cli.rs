use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fedrac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedrac")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

const TINY: &str = r#"
n_clients = 3
participants = 2
rounds = 2
seeds = [7]
eval_episodes = 1

[environment]
kind = "chain"
perturbation = 0.3

[learner]
batch_size = 64
minibatch = 16
epochs = 2
gamma = 0.9

[actor]
kind = "two_layer"
width = 8
radius = 5.0

[critic]
kind = "two_layer"
width = 8
radius = 5.0
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&fedrac(&["train"])), 2);
    assert_eq!(code(&fedrac(&["train", "--config", "/nonexistent/x.toml"])), 2);
    let bad = write(dir.path(), "bad.toml", &TINY.replace("participants = 2", "participants = 5"));
    let o = fedrac(&["compare", "--config", &bad]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("participants"));
    let unknown = write(dir.path(), "unknown.toml", &format!("{TINY}\nbogus = 1\n"));
    assert_eq!(code(&fedrac(&["compare", "--config", &unknown])), 2);
    let ok = write(dir.path(), "ok.toml", TINY);
    assert_eq!(code(&fedrac(&["train", "--config", &ok, "--variant", "both"])), 2);
}

#[test]
fn train_compare_and_plotdata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", TINY);
    let out = dir.path().join("train");
    let o = fedrac(&["train", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed-offset", "3", "--threads", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 2);
    assert!(metrics.lines().skip(1).all(|l| l.starts_with("10,")));

    let out = dir.path().join("cmp");
    let o = fedrac(&["compare", "--config", &cfg, "--out", out.to_str().unwrap(), "--algo", "all"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(out.join("metrics.csv")).unwrap().lines().count(), 1 + 2 * 3 * 2);

    let o = fedrac(&["plotdata", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(out.join("plot_mean_return.csv").exists());
    assert_eq!(code(&fedrac(&["plotdata", "--out", dir.path().join("none").to_str().unwrap()])), 1);
}

#[test]
fn sweep_writes_one_directory_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &TINY.replace("rounds = 2", "rounds = 1\nlevels = [0.0, 0.5]"));
    let out = dir.path().join("sweep");
    let o = fedrac(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--variant", "fedrac"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for level in ["level_0", "level_0.5"] {
        assert!(out.join(level).join("metrics.csv").exists(), "{level}");
    }
}

#[test]
fn divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
n_clients = 2
participants = 1
rounds = 2
seeds = [0]
variants = ["baseline"]

[environment]
kind = "car"
half_width = 1.0
horizon = 50

[environment.dynamics]
action_cost = 1.7976931348623157e308

[learner]
batch_size = 128
minibatch = 32
epochs = 1
"#;
    let cfg = write(dir.path(), "d.toml", text);
    let o = fedrac(&["train", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}
