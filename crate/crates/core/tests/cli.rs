use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use odeepc::config::to_toml_string;
use odeepc::experiment::{ExperimentConfig, Manifest};

fn odeepc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_odeepc")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn dir_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn small_generate_is_fast_and_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let out = odeepc(&["generate", "--small", "--out", dir_arg(a.path())]);
    assert!(started.elapsed().as_secs_f64() < 5.0);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(code(&odeepc(&["generate", "--small", "--out", dir_arg(b.path())])), 0);
    for file in ["inputs.csv", "outputs.csv", "plant.toml", "manifest.toml"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file} differs between runs");
    }
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = to_toml_string(&ExperimentConfig::small()).unwrap();

    let missing = dir.path().join("missing.toml");
    std::fs::write(&missing, text.replace("eps_nu = 0.1\n", "")).unwrap();
    let out = odeepc(&["generate", "--config", dir_arg(&missing), "--out", dir_arg(dir.path())]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("eps_nu"));

    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, text.replace("[plant]\n", "[plant]\ncolour = 3\n")).unwrap();
    let out = odeepc(&["generate", "--config", dir_arg(&unknown), "--out", dir_arg(dir.path())]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("colour") && err.contains("controller.horizon"), "{err}");

    assert_eq!(code(&odeepc(&["run", "--small", "--override", "nonsense=1"])), 2);
    assert_eq!(code(&odeepc(&["frobnicate"])), 2);
}

#[test]
fn constant_input_dataset_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&odeepc(&["generate", "--small", "--out", dir_arg(dir.path())])), 0);
    let path = dir.path().join("inputs.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let flat: String = text
        .lines()
        .enumerate()
        .map(|(i, line)| if i == 0 { format!("{line}\n") } else { format!("{},1\n", i - 1) })
        .collect();
    std::fs::write(&path, flat).unwrap();
    let out = odeepc(&["run", "--small", "--out", dir_arg(dir.path())]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn divergent_step_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = odeepc(&[
        "run",
        "--small",
        "--out",
        dir_arg(dir.path()),
        "--override",
        "alpha=10",
        "--override",
        "total_steps=50",
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("trace.csv").exists());
}

#[test]
fn run_writes_trace_and_echoes_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = odeepc(&[
        "run",
        "--small",
        "--mode",
        "gradient-deepc",
        "--out",
        dir_arg(dir.path()),
        "--override",
        "controller.alpha=0.002",
        "--override",
        "total_steps=5",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let m = Manifest::read(dir.path().join("manifest.toml")).unwrap();
    assert_eq!(m.alpha_used, Some(0.002));
    assert_eq!(m.config.scenario.total_steps, 5);
    assert_eq!(m.config.controller.mode.as_str(), "gradient-deepc");
    let trace = odeepc::experiment::parse_trace(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.len(), 5 * 50);
    assert!(dir.path().join("trace.manifest.toml").exists());
}

#[test]
fn small_bench_writes_its_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = odeepc(&["bench", "--small", "--trials", "1", "--out", dir_arg(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert!(text.starts_with("d,L,kappa,fast_ms,dense_ms,predicted_cost"));
    assert_eq!(text.lines().count(), 1 + 5 + 1);
}
