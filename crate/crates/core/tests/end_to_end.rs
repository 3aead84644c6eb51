use lpr_core::config::PipelineConfig;
use lpr_core::eval::{evaluate, EvalMode, EvalOptions};
use lpr_core::exec::Execution;
use lpr_core::knn::{train, KnnModel};
use lpr_core::pipeline::{PlateResult, Recognizer};
use lpr_core::pnm;
use lpr_core::raster::ColorImage;
use lpr_core::synth::{generate_corpus, glyph_samples, read_manifest, render_corpus_image, CorpusSpec, ALPHABET};
use std::sync::OnceLock;

fn model() -> &'static KnnModel {
    static MODEL: OnceLock<KnnModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let samples = glyph_samples(ALPHABET, 24, 5, Execution::Parallel).expect("harvest");
        train(&samples, 1, Execution::Parallel).expect("train")
    })
}

fn recognizer() -> Recognizer {
    Recognizer::new(PipelineConfig::default(), Some(model().clone())).unwrap()
}

fn scene(spec: &str, i: usize) -> (ColorImage, lpr_core::synth::ManifestRow) {
    render_corpus_image(&spec.parse().unwrap(), i)
}

fn without_timings(r: &PlateResult) -> String {
    r.to_record().lines().filter(|l| !l.starts_with("time_")).collect::<Vec<_>>().join("\n")
}

#[test]
fn reads_a_level_plate() {
    let (img, row) = scene("count=1,seed=21,text=12345678", 0);
    let res = recognizer().recognize(&img, "level", None).unwrap();
    assert!(res.found);
    assert!(res.bbox.unwrap().iou(&row.bbox()) >= 0.5);
    assert_eq!(res.text, "12345678");
    assert_eq!(res.plate_type.kind.name(), row.plate_type);
    assert_eq!(res.distances.len(), 8);
}

#[test]
fn reads_a_plate_tilted_twenty_degrees() {
    let (img, row) = scene("count=1,seed=4,tilt=20,text=12345678", 0);
    assert_eq!(row.tilt_degrees, 20.0);
    let res = recognizer().recognize(&img, "tilted", None).unwrap();
    assert!(res.found);
    assert!((res.tilt_degrees - 20.0).abs() < 2.0, "tilt {}", res.tilt_degrees);
    assert_eq!(res.text, "12345678");
}

#[test]
fn results_are_deterministic_and_timed() {
    let rec = recognizer();
    let (img, _) = scene("count=3,seed=9,noise=2,tilt=-10:10", 2);
    let a = rec.recognize(&img, "x", None).unwrap();
    let b = rec.recognize(&img, "x", None).unwrap();
    assert_eq!(without_timings(&a), without_timings(&b));
    assert!(a.found);
    for r in [&a, &b] {
        let sum = r.timings.sum() as f64;
        assert!(sum <= r.total_us as f64 * 1.1 + 1.0, "stage sum {sum} vs total {}", r.total_us);
        assert!(r.timings.stages.iter().any(|s| s.0 == "classify"));
    }
}

#[test]
fn sequential_and_parallel_corpora_match() {
    let spec: CorpusSpec = "count=4,seed=2,noise=3".parse().unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = generate_corpus(&spec, a.path(), Execution::Sequential).unwrap();
    let rb = generate_corpus(&spec, b.path(), Execution::Parallel).unwrap();
    assert_eq!(ra, rb);
    for r in &ra {
        assert_eq!(std::fs::read(a.path().join(&r.file)).unwrap(), std::fs::read(b.path().join(&r.file)).unwrap());
    }
}

#[test]
fn generated_manifest_matches_the_files() {
    let dir = tempfile::tempdir().unwrap();
    let spec: CorpusSpec = "count=100,seed=7".parse().unwrap();
    let rows = generate_corpus(&spec, dir.path(), Execution::Parallel).unwrap();
    assert_eq!(read_manifest(dir.path()).unwrap(), rows);
    assert_eq!(rows.len(), 100);
    let mut images: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".ppm"))
        .collect();
    images.sort();
    let listed: Vec<String> = rows.iter().map(|r| r.file.clone()).collect();
    assert_eq!(images, listed);
    for r in rows.iter().step_by(17) {
        let bytes = std::fs::read(dir.path().join(&r.file)).unwrap();
        let pnm::Pnm::Rgb { width, height, .. } = pnm::decode(&bytes).unwrap() else { panic!("{} is not a colour image", r.file) };
        assert_eq!((width, height), (spec.width, spec.height));
        assert!(r.bbox().fits_in(width, height));
    }
}

#[test]
fn evaluation_reports_exact_fractions() {
    let dir = tempfile::tempdir().unwrap();
    let spec: CorpusSpec = "count=3,seed=5".parse().unwrap();
    let rows = generate_corpus(&spec, dir.path(), Execution::Sequential).unwrap();
    // Blank out one image: nothing to find there.
    let blank = ColorImage::filled(spec.width, spec.height, [40, 40, 40]).unwrap();
    pnm::write_color(&dir.path().join(&rows[1].file), &blank).unwrap();

    let cfg = PipelineConfig::default();
    let opts = EvalOptions { seed: 1, exec: Execution::Sequential };
    let loc = evaluate(dir.path(), &cfg, EvalMode::Localization, None, opts).unwrap();
    assert_eq!(loc.corpus_size, 3);
    assert_eq!(loc.to_csv(), "mode,config,total,correct,rate\nlocalization,default,3,2,0.666667\n");

    let rec = evaluate(dir.path(), &cfg, EvalMode::Recognition, Some(model()), opts).unwrap();
    assert_eq!(rec.row("recognition", "characters").unwrap().total, 24);
    assert_eq!(rec.row("recognition", "strings").unwrap().correct, 2);
    assert_eq!(rec.rate("recognition", "characters"), Some(16.0 / 24.0));

    let sweep = evaluate(dir.path(), &cfg, EvalMode::ThresholdSweep, None, opts).unwrap();
    let configs: Vec<&str> = sweep.rows.iter().map(|r| r.config.as_str()).collect();
    assert_eq!(configs, ["fixed:0.4", "fixed:0.7", "adaptive"]);
    let ops = evaluate(dir.path(), &cfg, EvalMode::OperatorCompare, None, opts).unwrap();
    let configs: Vec<&str> = ops.rows.iter().map(|r| r.config.as_str()).collect();
    assert_eq!(configs, ["sobel", "prewitt", "roberts", "log"]);
}
