use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dren::io;
use dren::trainer::SweepReport;

fn dren(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dren"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

const SMALL: [&str; 6] = ["--synth", "blobs", "--per-class", "30", "--synth-dim", "8"];

#[test]
fn train_writes_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let mut args = vec!["train"];
    args.extend(SMALL);
    args.extend(["--classes", "3", "--dim", "2", "--lambda", "0.5", "--seed", "7", "--epochs", "5"]);
    let o = dren(&args, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["model.ckpt", "model.ckpt.json", "report.json", "embedding.csv", "embedding.svg", "manifest.json"] {
        assert!(out.join(name).is_file(), "{name}");
    }
    let text = fs::read_to_string(out.join("embedding.csv")).unwrap();
    assert_eq!(text.lines().count(), 90);
    assert!(text.lines().all(|l| l.split(',').count() == 4));
    let svg = fs::read_to_string(out.join("embedding.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 90);
    let manifest: io::Manifest = io::read_json(&out.join("manifest.json")).unwrap();
    assert!(manifest.outputs.iter().any(|d| d.name == "model.ckpt"));
}

#[test]
fn out_dir_comes_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("env-out");
    let o = Command::new(env!("CARGO_BIN_EXE_dren"))
        .args(["synth", "--per-class", "5", "--synth-dim", "3"])
        .env("DREN_OUT_DIR", &out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(out.join("features.csv").is_file());
}

#[test]
fn usage_errors_exit_with_status_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let mut args = vec!["train"];
    args.extend(SMALL);
    args.extend(["--lambda", "1.2"]);
    assert_eq!(dren(&args, &out).status.code(), Some(2));

    let mut args = vec!["sweep"];
    args.extend(SMALL);
    args.extend(["--lambdas", "", "--dims", "2"]);
    assert_eq!(dren(&args, &out).status.code(), Some(2));

    let mut args = vec!["train"];
    args.extend(SMALL);
    args.extend(["--alpha", "0.3"]);
    assert_eq!(dren(&args, &out).status.code(), Some(2));

    let mut args = vec!["train"];
    args.extend(SMALL);
    args.extend(["--perplexity", "200"]);
    assert_eq!(dren(&args, &out).status.code(), Some(2));
}

#[test]
fn malformed_features_report_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let f = tmp.path().join("f.csv");
    let l = tmp.path().join("l.csv");
    fs::write(&f, "a,b\n1,2\n3,oops\n").unwrap();
    fs::write(&l, "0\n1\n").unwrap();
    let o = dren(
        &["train", "--features", f.to_str().unwrap(), "--labels", l.to_str().unwrap()],
        &tmp.path().join("o"),
    );
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("f.csv:3:"), "{err}");
}

#[test]
fn sweep_grid_bookkeeping() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let mut args = vec!["sweep"];
    args.extend(SMALL);
    args.extend(["--epochs", "3", "--lambdas", "0,0.5,1", "--dims", "2,3", "--folds", "2"]);
    let o = dren(&args, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: SweepReport = io::read_json(&out.join("sweep.json")).unwrap();
    assert_eq!(report.cells.len(), 6);
    assert_eq!(report.cells.iter().map(|c| c.runs.len()).sum::<usize>(), 12);
    for cell in &report.cells {
        assert_eq!(cell.unsupervised_degenerate, cell.lambda == 1.0);
        assert_eq!(cell.accuracy.unwrap().n, 2);
    }
    let table = fs::read_to_string(out.join("sweep.txt")).unwrap();
    assert!(table.starts_with("lambda\td=2\td=3\n"));
}

#[test]
fn sweep_fails_only_when_every_cell_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    // Batches of 20 cannot hold perplexity 19 + 2 samples.
    let mut args = vec!["sweep"];
    args.extend(SMALL);
    args.extend(["--epochs", "2", "--lambdas", "0.5", "--dims", "2", "--folds", "1", "--batch", "20", "--perplexity", "19"]);
    let o = dren(&args, &out);
    assert_eq!(o.status.code(), Some(1));
    let report: SweepReport = io::read_json(&out.join("sweep.json")).unwrap();
    assert!(report.cells[0].failed());
    assert!(!report.cells[0].warnings.is_empty());
}

#[test]
fn file_pipeline_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    assert!(dren(&["synth", "--per-class", "20", "--synth-dim", "6"], &data).status.success());
    let f = data.join("features.csv");
    let l = data.join("labels.csv");
    let ts = tmp.path().join("tsne");
    let o = dren(
        &["tsne", "--features", f.to_str().unwrap(), "--labels", l.to_str().unwrap(), "--iterations", "150"],
        &ts,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let emb = ts.join("tsne_embedding.csv");
    let oos = tmp.path().join("oos");
    let o = dren(
        &[
            "embed-oos",
            "--train-features",
            f.to_str().unwrap(),
            "--train-embedding",
            emb.to_str().unwrap(),
            "--test-features",
            f.to_str().unwrap(),
            "--test-labels",
            l.to_str().unwrap(),
            "--k",
            "1",
        ],
        &oos,
    );
    assert!(o.status.success());
    // k = 1 against the training set itself reproduces the embedding.
    let a = io::read_embedding(&emb).unwrap();
    let b = io::read_embedding(&oos.join("oos_embedding.csv")).unwrap();
    assert_eq!(a, b);
    let knn = tmp.path().join("knn");
    let o = dren(
        &[
            "knn-eval",
            "--train-embedding",
            emb.to_str().unwrap(),
            "--test-embedding",
            oos.join("oos_embedding.csv").to_str().unwrap(),
            "--k",
            "1",
        ],
        &knn,
    );
    assert!(o.status.success());
    let m: dren::eval::MetricsRecord = io::read_json(&knn.join("metrics.json")).unwrap();
    assert_eq!(m.accuracy, 1.0);
}
