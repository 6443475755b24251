use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ndf::geom::io::read_ply;
use ndf::PointCloud;
use serde_json::Value;

fn ndf(dir: &Path, args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ndf"));
    cmd.current_dir(dir).args(args);
    match threads {
        Some(n) => cmd.env("NDF_THREADS", n.to_string()),
        None => cmd.env_remove("NDF_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = ndf(dir, args, None);
    assert!(
        out.status.success(),
        "ndf {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn error(dir: &Path, args: &[&str]) -> (i32, Value) {
    let out = ndf(dir, args, None);
    assert!(!out.status.success(), "ndf {args:?} should fail");
    let err: Value = serde_json::from_slice(&out.stderr).expect("stderr is json");
    (out.status.code().unwrap(), err["error"].clone())
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = vec![];
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn analytic_sphere_extraction_lies_on_the_sphere() {
    let t = tempfile::tempdir().unwrap();
    ok(t.path(), &["extract", "--analytic", "sphere:r=0.35", "--n", "5000", "--m", "5000", "--out", "s.ply"]);
    let pc: PointCloud<3> = read_ply(&t.path().join("s.ply")).unwrap();
    assert_eq!(pc.len(), 5000);
    // PLY stores f32, so allow for its rounding on top of 1e-6
    for p in &pc.points {
        assert!((p.norm() - 0.35).abs() < 1e-6 + 1e-7, "radius {}", p.norm());
    }
}

#[test]
fn eval_of_identical_clouds_is_zero() {
    let t = tempfile::tempdir().unwrap();
    ok(t.path(), &["extract", "--analytic", "torus", "--n", "2000", "--m", "2000", "--out", "a.ply"]);
    let report: Value = serde_json::from_str(&ok(t.path(), &["eval", "--pred", "a.ply", "--gt", "a.ply"])).unwrap();
    assert_eq!(report["chamfer_l2"], 0.0);
    assert_eq!(report["gt_points"], 2000);
}

#[test]
fn errors_are_json_and_precede_work() {
    let t = tempfile::tempdir().unwrap();
    let (code, e) = error(t.path(), &["extract", "--analytic", "blob", "--out", "x.ply"]);
    assert_eq!((code, e["kind"].as_str().unwrap()), (2, "shape"));
    let (code, e) = error(t.path(), &["extract", "--analytic", "sphere", "--out", "missing/x.ply"]);
    assert_eq!((code, e["kind"].as_str().unwrap()), (2, "usage"));
    let (_, e) = error(t.path(), &["extract", "--analytic", "sphere", "--out", "x.obj"]);
    assert_eq!(e["kind"], "usage");
    let (_, e) = error(t.path(), &["train", "--data", "nowhere", "--out", "m.ndf"]);
    assert_eq!(e["kind"], "io");
    let (_, e) = error(t.path(), &["train", "--lr=-1", "--data", "nowhere", "--out", "m.ndf"]);
    assert_eq!(e["kind"], "model", "config is checked before the data is read");
    let (_, e) = error(t.path(), &["render", "--analytic", "circle", "--out", "img"]);
    assert_eq!(e["kind"], "usage");
    let (_, e) = error(t.path(), &["regress", "--analytic", "circle"]);
    assert_eq!(e["kind"], "usage");
    let (_, e) = error(t.path(), &["make-data", "--shape", "sphere:r=0.7", "--out", "d"]);
    assert_eq!(e["kind"], "shape");
    assert!(!t.path().join("d").exists());
    let (_, e) = error(t.path(), &["frobnicate"]);
    assert_eq!(e["kind"], "usage");
}

#[test]
fn config_file_fills_flags_and_rejects_unknown_keys() {
    let t = tempfile::tempdir().unwrap();
    fs::write(t.path().join("c.json"), r#"{"n": 1500, "m": 1000, "analytic": "sphere:r=0.3"}"#).unwrap();
    ok(t.path(), &["extract", "--config", "c.json", "--out", "a.ply"]);
    let a: PointCloud<3> = read_ply(&t.path().join("a.ply")).unwrap();
    assert_eq!(a.len(), 1500);
    // the command line wins
    ok(t.path(), &["extract", "--config", "c.json", "--n", "700", "--out", "b.ply"]);
    let b: PointCloud<3> = read_ply(&t.path().join("b.ply")).unwrap();
    assert_eq!(b.len(), 700);
    fs::write(t.path().join("bad.json"), r#"{"n": 10, "eps9": 1}"#).unwrap();
    let (_, e) = error(t.path(), &["extract", "--config", "bad.json", "--analytic", "sphere", "--out", "c.ply"]);
    assert_eq!(e["kind"], "config");
    assert!(e["message"].as_str().unwrap().contains("eps9"));
}

#[test]
fn help_lists_defaults() {
    let t = tempfile::tempdir().unwrap();
    let help = ok(t.path(), &["train", "--help"]);
    for flag in ["--epochs", "--lr", "--delta", "--points-per-shape", "--decoder-hidden", "--resolutions"] {
        assert!(help.contains(flag), "{flag} missing from help");
    }
    assert!(help.contains("[default: 256 256 256 256]"));
}

/// Runs a small pipeline and returns every file it wrote plus stdout of the
/// JSON-emitting commands.
fn pipeline(dir: &Path, threads: Option<usize>) -> (Vec<(PathBuf, Vec<u8>)>, Vec<Vec<u8>>) {
    let run = |args: &[&str]| {
        let out = ndf(dir, args, threads);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    run(&["make-data", "--curves", "spiral", "--count", "3", "--samples", "600", "--out", "curves"]);
    run(&["make-data", "--shape", "half-sphere:r=0.3", "--shape", "torus", "--samples", "3000", "--out", "shapes"]);
    run(&[
        "train", "--data", "curves", "--out", "c.ndf", "--epochs", "3", "--points-per-shape", "64",
        "--decoder-hidden", "16,16", "--resolutions", "16,8",
    ]);
    run(&[
        "train", "--data", "shapes", "--out", "s.ndf", "--epochs", "2", "--points-per-shape", "64",
        "--decoder-hidden", "16", "--resolutions", "8,4", "--channels", "4",
    ]);
    run(&["extract", "--ckpt", "s.ndf", "--input", "shapes/shape_000/input.ply", "--n", "500", "--m", "500", "--normals", "--out", "x.ply"]);
    run(&["extract", "--analytic", "spiral", "--n", "500", "--m", "500", "--out", "spiral.xyz"]);
    run(&["render", "--ckpt", "s.ndf", "--input", "shapes/shape_001/input.ply", "--width", "24", "--height", "16", "--out", "img"]);
    run(&["render", "--analytic", "torus", "--width", "24", "--height", "16", "--out", "exact"]);
    let stdout = vec![
        run(&["regress", "--ckpt", "c.ndf", "--input", "curves/spiral_0000/input.ply", "--x", "-0.2,0,0.2"]),
        run(&["regress", "--analytic", "spiral", "--x", "-0.3,0.1"]),
        run(&["eval", "--pred", "x.ply", "--gt", "half-sphere:r=0.3", "--samples", "2000"]),
    ];
    (files(dir), stdout)
}

#[test]
fn commands_are_deterministic_and_thread_independent() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = pipeline(a.path(), Some(1));
    let rb = pipeline(b.path(), Some(1));
    let rc = pipeline(c.path(), Some(3));
    assert!(ra.0.len() > 20);
    for (x, y) in ra.0.iter().zip(&rb.0) {
        assert_eq!(x.0, y.0);
        assert!(x.1 == y.1, "{} differs between identical runs", x.0.display());
    }
    for (x, y) in ra.0.iter().zip(&rc.0) {
        assert!(x.1 == y.1, "{} differs between 1 and 3 threads", x.0.display());
    }
    assert_eq!(ra.0.len(), rc.0.len());
    assert_eq!(ra.1, rb.1);
    assert_eq!(ra.1, rc.1);
}

#[test]
fn circle_pipeline_beats_the_sparse_input() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(d, &["make-data", "--shape", "circle:r=0.3", "--samples", "20000", "--sparse-k", "100", "--out", "data"]);
    ok(d, &[
        "train", "--data", "data", "--out", "m.ndf", "--epochs", "1500", "--batch-shapes", "1",
        "--points-per-shape", "1024", "--lr", "1e-3", "--decoder-hidden", "128,128,128",
    ]);
    let metrics: Value = serde_json::from_str(&fs::read_to_string(d.join("m.ndf.metrics.json")).unwrap()).unwrap();
    assert!(metrics["final_val_loss"].as_f64().unwrap() < 0.005);
    ok(d, &[
        "extract", "--ckpt", "m.ndf", "--input", "data/shape_000/input.ply", "--n", "20000", "--m", "20000",
        "--out", "dense.ply",
    ]);
    let chamfer = |pred: &str| -> f64 {
        let r: Value = serde_json::from_str(&ok(d, &["eval", "--pred", pred, "--gt", "circle:r=0.3", "--samples", "20000"])).unwrap();
        r["chamfer_l2"].as_f64().unwrap()
    };
    let (dense, sparse) = (chamfer("dense.ply"), chamfer("data/shape_000/input.ply"));
    eprintln!("chamfer dense {dense:.3e} sparse input {sparse:.3e}");
    assert!(dense < sparse, "dense {dense} vs input {sparse}");
}
