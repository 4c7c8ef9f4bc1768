//! Drives the `psbml` binary end to end on small inputs.

use std::fs;
use std::path::Path;
use std::process::Command;

fn psbml(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_psbml")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "psbml {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn generate_train_modeshift_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("circle.csv");
    psbml(&["generate", "--kind", "circle", "--n", "3000", "--seed", "3", "--out", data.to_str().unwrap()]);
    assert_eq!(header(&data), "id,f0,f1,label");
    let meta = fs::read_to_string(d.join("circle.csv.meta")).unwrap();
    assert!(meta.contains("kind=circle") && meta.contains("n=3000") && meta.contains("seed=3"));

    let cfg = d.join("train.cfg");
    fs::write(&cfg, "# small grid\ngrid.width=3\ngrid.height=3\ngrid.epochs=4\nlearner=circle\n").unwrap();
    let out = d.join("run");
    let args = [
        "train",
        "--data",
        data.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "2",
        "--threads",
        "2",
        "--out",
        out.to_str().unwrap(),
    ];
    psbml(&args);
    assert_eq!(header(&out.join("epochs.csv")), "epoch,val_error,distinct_count,cs_min,cs_max");
    assert_eq!(fs::read_to_string(out.join("epochs.csv")).unwrap().lines().count(), 5);
    for k in 1..=4 {
        assert_eq!(header(&out.join(format!("weights_epoch{k}.csv"))), "bin,bin_lo,bin_hi,mass");
    }
    let model = fs::read_to_string(out.join("model.txt")).unwrap();
    assert!(model.starts_with("learner=circle\n"));
    assert!(model.contains("grid.epochs=4") && model.contains("best_epoch="));

    let modes = d.join("modes");
    let stdout = psbml(&[
        "modeshift",
        "--data",
        data.to_str().unwrap(),
        "--weights",
        "circle:0,0,0.4,0.1",
        "--components",
        "2",
        "--quantile-axis",
        "1",
        "--seed",
        "1",
        "--out",
        modes.to_str().unwrap(),
    ]);
    assert_eq!(stdout, fs::read_to_string(modes.join("modes.csv")).unwrap());
    let rows: Vec<Vec<f64>> = stdout
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert!((r[0].hypot(r[1]) - 0.4).abs() < 0.1, "mode {r:?} is off the boundary");
        assert!(r[3] < 1e-6, "gradient norm {}", r[3]);
    }
    assert_eq!(header(&modes.join("histogram.csv")), "bin_lo,bin_hi,mass");
}

#[test]
fn experiment_writes_tables_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    fs::write(&cfg, "data.n=600\nexp.repeats=2\nexp.pr_values=0.1,0.8\ngrid.epochs=3\nlearner=nb\n").unwrap();
    let out = dir.path().join("pr");
    let stdout = psbml(&[
        "experiment",
        "--name",
        "pr-sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "3",
        "--threads",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(stdout.starts_with("experiment: pr-sweep\nseed: 3\n"));
    assert_eq!(header(&out.join("curves.csv")), "pr,epoch,mean_val_error,mean_distinct");
    assert!(fs::read_to_string(out.join("summary.txt")).unwrap().contains("config.learner: nb"));
}

#[test]
fn bad_input_is_reported() {
    let out = Command::new(env!("CARGO_BIN_EXE_psbml"))
        .args(["experiment", "--name", "nope", "--out", "x"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_psbml"))
        .args(["train", "--data", "/nonexistent.csv", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
