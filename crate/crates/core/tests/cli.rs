//! Black-box tests of the `cpdflow` binary: CSV schemas, determinism,
//! plot output, and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_cpdflow");

fn write_config(dir: &Path, out_dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("config.toml");
    let text = format!(
        r#"
seed = 5
out_dir = "{}"

[dataset]
kind = "ring"
n_per_class = 50

[training]
epochs = 2
batch_size = 64
hidden_width = 16

[solver]
kind = "euler"
n_steps = 6

[eval]
n_per_condition = 20
{extra}
"#,
        out_dir.display()
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn train_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let cfg_a = write_config(dir.path(), &out_a, "");
    run_ok(&["train", "--config", cfg_a.to_str().unwrap()]);
    run_ok(&[
        "train",
        "--config",
        cfg_a.to_str().unwrap(),
        "--out",
        out_b.to_str().unwrap(),
    ]);
    // wall_ms varies run to run; the losses themselves must not
    fn loss_columns(path: &Path) -> Vec<String> {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|l| l.splitn(3, ',').take(2).collect::<Vec<_>>().join(","))
            .collect()
    }
    let losses_a = loss_columns(&out_a.join("losses.csv"));
    let losses_b = loss_columns(&out_b.join("losses.csv"));
    assert_eq!(losses_a, losses_b, "same seed must give identical loss history");

    // a different seed must change the history
    let out_c = dir.path().join("c");
    run_ok(&[
        "train",
        "--config",
        cfg_a.to_str().unwrap(),
        "--out",
        out_c.to_str().unwrap(),
        "--seed",
        "99",
    ]);
    let losses_c = loss_columns(&out_c.join("losses.csv"));
    assert_ne!(losses_a, losses_c);
}

#[test]
fn sample_csv_schema_and_nfe() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &out, "");
    run_ok(&["train", "--config", cfg.to_str().unwrap()]);
    run_ok(&[
        "sample",
        "--config",
        cfg.to_str().unwrap(),
        "--condition",
        "3",
        "--n",
        "4",
        "--trajectories",
    ]);
    let text = std::fs::read_to_string(out.join("samples.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "sample_id,condition,nfe,x_0,x_1,split");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[1], "3");
        // Euler with n_steps = 6 costs exactly 6 field evaluations
        assert_eq!(fields[2], "6");
        fields[3].parse::<f64>().unwrap();
        fields[4].parse::<f64>().unwrap();
        assert_eq!(fields[5], "train");
    }

    // fixed seed: re-running reproduces the file byte for byte
    let bytes_a = std::fs::read(out.join("samples.csv")).unwrap();
    run_ok(&[
        "sample",
        "--config",
        cfg.to_str().unwrap(),
        "--condition",
        "3",
        "--n",
        "4",
        "--trajectories",
    ]);
    let bytes_b = std::fs::read(out.join("samples.csv")).unwrap();
    assert_eq!(bytes_a, bytes_b);

    let traj = std::fs::read_to_string(out.join("trajectories.csv")).unwrap();
    let mut traj_lines = traj.lines();
    assert_eq!(traj_lines.next().unwrap(), "sample_id,t,x_0,x_1");
    // 4 samples x 7 recorded states (t = 0 plus 6 steps)
    assert_eq!(traj_lines.count(), 28);
}

#[test]
fn sample_zero_count_keeps_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &out, "");
    run_ok(&["train", "--config", cfg.to_str().unwrap()]);
    run_ok(&[
        "sample",
        "--config",
        cfg.to_str().unwrap(),
        "--n",
        "0",
    ]);
    let text = std::fs::read_to_string(out.join("samples.csv")).unwrap();
    assert_eq!(text.trim_end(), "sample_id,condition,nfe,x_0,x_1,split");
}

#[test]
fn unknown_condition_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(dir.path(), &out_dir, "");
    run_ok(&["train", "--config", cfg.to_str().unwrap()]);
    let out = run(&[
        "sample",
        "--config",
        cfg.to_str().unwrap(),
        "--condition",
        "no-such-class",
        "--n",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no-such-class"));
}

#[test]
fn zero_epochs_still_writes_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(dir.path(), &out_dir, "");
    // override epochs via a second config
    let path = dir.path().join("zero.toml");
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("epochs = 2", "epochs = 0");
    std::fs::write(&path, text).unwrap();
    run_ok(&["train", "--config", path.to_str().unwrap()]);
    assert!(out_dir.join("model.json").exists());
    let losses = std::fs::read_to_string(out_dir.join("losses.csv")).unwrap();
    assert_eq!(losses.trim_end(), "epoch,mean_loss,wall_ms");
}

#[test]
fn plot_produces_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &out, "");
    run_ok(&["gen-data", "--config", cfg.to_str().unwrap()]);
    let svg_path = out.join("dataset.svg");
    run_ok(&[
        "plot",
        "--kind",
        "scatter",
        "--input",
        out.join("dataset.csv").to_str().unwrap(),
        "--output",
        svg_path.to_str().unwrap(),
        "--group",
        "condition",
        "--title",
        "ring",
    ]);
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<svg "));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains("<circle"));
}

#[test]
fn config_errors_exit_with_code_one() {
    // missing config file
    let out = run(&["train", "--config", "/nonexistent/config.toml"]);
    assert_eq!(out.status.code(), Some(1));

    // unknown key in the config
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[dataset]\nkind = \"ring\"\nbogus = 1\n").unwrap();
    let out = run(&["train", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    // eval without a trained checkpoint
    let out_dir = dir.path().join("out");
    let cfg = write_config(dir.path(), &out_dir, "");
    let out = run(&["eval", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let path = dir.path().join("diverge.toml");
    // a learning rate this large overflows the forward pass within a few
    // steps (Adam caps each update near the learning rate, so it must be
    // big enough that squaring the activations hits infinity)
    let text = format!(
        r#"
seed = 5
out_dir = "{}"

[dataset]
kind = "ring"
n_per_class = 50

[training]
epochs = 50
batch_size = 64
hidden_width = 16
learning_rate = 1e200
"#,
        out_dir.display()
    );
    std::fs::write(&path, text).unwrap();
    let out = run(&["train", "--config", path.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn manifest_records_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &out, "");
    run_ok(&["gen-data", "--config", cfg.to_str().unwrap()]);
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out.join("manifest-gen-data.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["command"], "gen-data");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["produced_files"]
        .as_array()
        .unwrap()
        .iter()
        .any(|f| f.as_str().unwrap().ends_with("dataset.csv")));
}
