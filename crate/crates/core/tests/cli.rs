use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn apcharge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apcharge"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn repo_config(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name].iter().collect()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const SMALL: &str = r#"
[experiment]
agents = ["greedy", "random", "no-policy"]
total_slots = 900
episode_length = 300
collection_slot = 300
seeds = [1, 2]
"#;

#[test]
fn shipped_configs_validate() {
    for entry in std::fs::read_dir(repo_config("")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let out = apcharge(&["validate-config", "-c", path.to_str().unwrap()]);
            assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
            assert!(String::from_utf8_lossy(&out.stdout).contains("[experiment]"));
        }
    }
}

#[test]
fn invalid_configs_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "unknown.toml", "[model]\nmax_pwr = 3.0\n");
    let out = apcharge(&["validate-config", "-c", &unknown]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_pwr"));

    let range = write(dir.path(), "range.toml", "[dqn]\ndiscount = 1.5\n");
    let out = apcharge(&["run", "-c", &range, "-o", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dqn.discount"));
}

#[test]
fn missing_file_names_the_path() {
    let out = apcharge(&["validate-config", "-c", "/nonexistent/cfg.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/cfg.toml"));
}

#[test]
fn run_writes_csv_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out_dir = dir.path().join("out");
    let out = apcharge(&["run", "-c", &cfg, "-s", "7", "-w", "1", "-o", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("agent"));
    assert!(stdout.contains("no-policy"));

    let episodes = std::fs::read_to_string(out_dir.join("episodes.csv")).unwrap();
    let lines: Vec<&str> = episodes.lines().collect();
    assert_eq!(
        lines[0],
        "episode_index,agent,seed,activated_devices,satisfied_fraction,energy_efficiency,reward"
    );
    // --seed replaces the seed list: 3 agents × 1 seed × 3 episodes.
    assert_eq!(lines.len(), 1 + 3 * 3);
    assert!(lines[1..].iter().all(|l| l.split(',').nth(2) == Some("7")));
    assert!(!episodes.contains('\r'));

    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 3 * 4);
    assert!(summary.lines().skip(1).all(|l| l.ends_with(",1,2")));
    assert!(out_dir.join("summary.txt").exists());
}

#[test]
fn run_output_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let mut files = Vec::new();
    for w in ["1", "3"] {
        let out_dir = dir.path().join(format!("w{w}"));
        let out = apcharge(&["run", "-c", &cfg, "-w", w, "-o", out_dir.to_str().unwrap()]);
        assert!(out.status.success());
        files.push((
            std::fs::read(out_dir.join("episodes.csv")).unwrap(),
            std::fs::read(out_dir.join("summary.csv")).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn sweep_writes_one_block_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}\n[sweep]\naxis = \"panel-area\"\nvalues = [12.0, 21.0]\n");
    let cfg = write(dir.path(), "sweep.toml", &text);
    let out_dir = dir.path().join("out");
    let out = apcharge(&["sweep", "-c", &cfg, "-o", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("axis,axis_value,agent,seed,metric,value\n"));
    // 2 values × 3 agents × 2 seeds × 4 metrics.
    assert_eq!(csv.lines().count(), 1 + 2 * 3 * 2 * 4);
    assert!(csv.contains("\npanel-area,21,greedy,2,reward,"));
    let summary = std::fs::read_to_string(out_dir.join("sweep_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 3 * 4);
}

#[test]
fn sweep_without_axis_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out = apcharge(&["sweep", "-c", &cfg, "-o", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sweep"));
}
