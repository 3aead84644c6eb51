use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lpr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpr")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(lpr(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(lpr(&["recognize"]).status.code(), Some(2));
    let bad = lpr(&["config", "--set", "threshold.mode=sometimes"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("threshold.mode"), "{}", stderr(&bad));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never-written");
    assert_eq!(lpr(&["generate", path(&out), "--spec", "count=0"]).status.code(), Some(2));
    assert!(!out.exists());
    assert_eq!(lpr(&["train", "-o", path(&out)]).status.code(), Some(2));
}

#[test]
fn config_text_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = lpr(&["config", "--set", "knn.k=3", "--set", "edge.operator=prewitt"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("knn.k = 3"), "{text}");
    let file = dir.path().join("lpr.conf");
    fs::write(&file, format!("# saved settings\n{text}")).unwrap();
    let again = lpr(&["config", "--config", path(&file)]);
    assert_eq!(stdout(&again), text);
    let keys = stdout(&lpr(&["config", "--keys"]));
    assert!(keys.lines().any(|l| l.starts_with("threshold.mode")));
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let o = lpr(&["generate", path(d), "--seed", "7", "--count", "5"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let names = ["manifest.csv", "img_0000.ppm", "img_0004.ppm"];
    for n in names {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n}");
    }
    let manifest = fs::read_to_string(a.join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 6);
}

#[test]
fn train_recognize_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let model = dir.path().join("model.txt");
    let o = lpr(&["generate", path(&corpus), "--spec", "count=3,text=AB12CD34,glyphs=2", "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = lpr(&["train", "--glyphs", path(&corpus.join("glyphs")), "-o", path(&model)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(fs::read_to_string(&model).unwrap().starts_with("knn-model v1"));

    let img = corpus.join("img_0000.ppm");
    let missing = corpus.join("missing.ppm");
    let csv = dir.path().join("out.csv");
    let debug = dir.path().join("debug");
    let o = lpr(&[
        "recognize",
        path(&img),
        path(&missing),
        "--model",
        path(&model),
        "--csv",
        path(&csv),
        "--debug-dir",
        path(&debug),
    ]);
    assert_eq!(o.status.code(), Some(1), "a missing input is a per-file failure");
    let text = stdout(&o);
    assert!(text.contains("found: true"), "{text}");
    assert!(text.contains("text: AB12CD34"), "{text}");
    assert!(stderr(&o).contains("missing.ppm"));
    let summary = fs::read_to_string(&csv).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(debug.join("img_0000").join("00_gray.pgm").exists());

    let report = dir.path().join("report.csv");
    let o = lpr(&["evaluate", path(&corpus), "--mode", "recognition", "--model", path(&model), "--csv", path(&report)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = fs::read_to_string(&report).unwrap();
    assert!(rows.starts_with("mode,config,total,correct,rate\n"));
    assert!(rows.contains("recognition,localization,3,3,1.000000"), "{rows}");

    let o = lpr(&["evaluate", path(&corpus), "--mode", "recognition"]);
    assert_eq!(o.status.code(), Some(2));
    let o = lpr(&["evaluate", path(dir.path())]);
    assert_eq!(o.status.code(), Some(1), "missing manifest");
}
