//! Runs the `motioncf` binary on a reduced config.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use motioncf::dataset::{load_motion_file, LoadOptions};
use motioncf::harness::read_paired_motion;

const SMALL: &str = r#"
n_eval = 2
folds = 3

[data]
kind = "synthetic"
n_per_class = 24

[autoencoder.train]
epochs = 5

[classifier.train]
epochs = 5

[mlp.train]
epochs = 5
"#;

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
        Workspace { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, out: &str, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_motioncf"))
            .current_dir(self.dir.path())
            .args(["--config", "small.toml", "--out", out])
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, out: &str, args: &[&str]) -> String {
        let o = self.run(out, args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    }
}

fn first_poor(dataset: &Path) -> String {
    let ds = load_motion_file(dataset, &LoadOptions::default()).unwrap();
    ds.samples.iter().find(|s| s.id.contains("poor")).unwrap().id.clone()
}

#[test]
fn train_explain_and_export() {
    let ws = Workspace::new();
    ws.ok("o", &["gen-data"]);
    let ds = load_motion_file(&ws.path("o/dataset.csv"), &LoadOptions::default()).unwrap();
    assert_eq!(ds.len(), 48);
    let id = first_poor(&ws.path("o/dataset.csv"));

    ws.ok("o", &["train"]);
    assert!(ws.path("o/bundle.mcf").exists());
    assert!(ws.path("o/config.toml").exists());

    for method in ["latent", "nn-l1", "nn-l2", "nn-dtw"] {
        let stdout = ws.ok(
            "o",
            &["explain", "--instance", &id, "--method", method, "--target", "good"],
        );
        let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
        assert_eq!(v["method"], method);
        assert_eq!(v["target"], "good");
        assert_eq!(v["neighbor"].is_null(), method == "latent");
    }

    ws.ok(
        "o",
        &[
            "export",
            "--instance",
            &id,
            "--method",
            "nn-l1",
            "--file",
            "pair.motion",
        ],
    );
    let pair = read_paired_motion(&ws.path("pair.motion")).unwrap();
    assert_eq!(pair.original.id, id);
    assert_eq!(pair.header["method"], "nn-l1");
    assert_eq!(pair.counterfactual.frames.shape(), (60, 15));
}

#[test]
fn evaluate_is_byte_reproducible() {
    let ws = Workspace::new();
    let table = ws.ok("a", &["evaluate", "--seed", "3"]);
    assert!(table.starts_with("| Metric | latent | nn-l1 | nn-l2 | nn-dtw |"));
    ws.ok("b", &["evaluate", "--seed", "3"]);
    for f in [
        "per_instance.csv",
        "aggregates.csv",
        "failures.csv",
        "table.md",
        "table.csv",
    ] {
        let a = std::fs::read(ws.path(&format!("a/evaluation/{f}"))).unwrap();
        let b = std::fs::read(ws.path(&format!("b/evaluation/{f}"))).unwrap();
        assert_eq!(a, b, "{f}");
    }
    assert_eq!(
        std::fs::read(ws.path("a/bundle.mcf")).unwrap(),
        std::fs::read(ws.path("b/bundle.mcf")).unwrap()
    );
}

#[test]
fn benchmark_reports_the_majority_baseline() {
    let ws = Workspace::new();
    let table = ws.ok("o", &["benchmark"]);
    let row = table.lines().find(|l| l.starts_with("| Balanced accuracy")).unwrap();
    assert!(row.ends_with("| 0.50 (0.00) |"), "{row}");
    assert!(ws.path("o/benchmark/folds.csv").exists());
}

#[test]
fn failures_exit_with_their_category() {
    let ws = Workspace::new();
    let missing = ws.run("nowhere", &["explain", "--instance", "x"]);
    assert_eq!(missing.status.code(), Some(7));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error [io]"));

    std::fs::write(ws.path("bad.toml"), "folds = \"five\"").unwrap();
    let bad = Command::new(env!("CARGO_BIN_EXE_motioncf"))
        .current_dir(ws.dir.path())
        .args(["--config", "bad.toml", "benchmark"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));

    std::fs::write(ws.path("junk.mcf"), b"not a bundle").unwrap();
    let corrupt = ws.run("o", &["explain", "--instance", "x", "--bundle", "junk.mcf"]);
    assert_eq!(corrupt.status.code(), Some(6));
}
