//! Corpus evaluation: localization and recognition rates, threshold and
//! edge-operator comparisons, and train/test split strategies for the
//! character classifier.

use crate::config::{PipelineConfig, ThresholdMode};
use crate::dataset::{load_glyph_dataset, DatasetError};
use crate::edges::EdgeOperator;
use crate::exec::{map_ordered, Execution};
use crate::features::{extract_features, FeatureError, FeatureVector};
use crate::io::load_color;
use crate::knn::{Entry, KnnError, KnnModel, MinMax};
use crate::pipeline::{PipelineError, Recognizer};
use crate::raster::BinaryImage;
use crate::segment::{prepare_plate, segment_chars};
use crate::synth::{read_manifest, ManifestRow, SynthError};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

/// Minimum intersection-over-union for a detection to count as localized.
pub const IOU_MIN: f64 = 0.5;

/// Subdirectory of a corpus holding the labeled glyph set.
pub const GLYPH_DIR: &str = "glyphs";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Manifest(#[from] SynthError),
    #[error("{file}: {source}")]
    Image { file: String, source: PipelineError },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("glyph {index} ({label}): {source}")]
    Feature { index: usize, label: String, source: FeatureError },
    #[error(transparent)]
    Knn(#[from] KnnError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("recognition evaluation needs a trained model")]
    NoModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Localization,
    Recognition,
    ThresholdSweep,
    OperatorCompare,
    Strategy,
}

impl EvalMode {
    pub const ALL: [EvalMode; 5] =
        [EvalMode::Localization, EvalMode::Recognition, EvalMode::ThresholdSweep, EvalMode::OperatorCompare, EvalMode::Strategy];

    pub fn name(&self) -> &'static str {
        match self {
            EvalMode::Localization => "localization",
            EvalMode::Recognition => "recognition",
            EvalMode::ThresholdSweep => "threshold-sweep",
            EvalMode::OperatorCompare => "operator-compare",
            EvalMode::Strategy => "strategy",
        }
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EvalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EvalMode::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<&str> = EvalMode::ALL.iter().map(|m| m.name()).collect();
            format!("unknown evaluation mode {s:?} (expected one of {})", names.join(", "))
        })
    }
}

/// One measured configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalRow {
    pub mode: String,
    pub config: String,
    pub total: usize,
    pub correct: usize,
}

impl EvalRow {
    fn new(mode: &str, config: impl Into<String>, total: usize, correct: usize) -> Self {
        EvalRow { mode: mode.to_string(), config: config.into(), total, correct }
    }

    /// `correct / total`, or 0 for an empty row.
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalReport {
    /// Images in the manifest, or glyphs in the set for split strategies.
    pub corpus_size: usize,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn row(&self, mode: &str, config: &str) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.mode == mode && r.config == config)
    }

    pub fn rate(&self, mode: &str, config: &str) -> Option<f64> {
        self.row(mode, config).map(EvalRow::rate)
    }

    /// `mode,config,total,correct,rate` with rates to six decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,config,total,correct,rate\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{:.6}", r.mode, r.config, r.total, r.correct, r.rate());
        }
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "corpus size: {}", self.corpus_size)?;
        for r in &self.rows {
            writeln!(f, "{:<17} {:<22} {:>6}/{:<6} {:.4}", r.mode, r.config, r.correct, r.total, r.rate())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    /// Seed for the train/test shuffles.
    pub seed: u64,
    pub exec: Execution,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { seed: 1, exec: Execution::Parallel }
    }
}

/// Per-image outcome against the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageOutcome {
    pub file: String,
    pub iou: f64,
    pub truth: String,
    pub text: String,
}

impl ImageOutcome {
    pub fn localized(&self) -> bool {
        self.iou >= IOU_MIN
    }

    /// Characters matching the truth position by position.
    pub fn matching_chars(&self) -> usize {
        self.truth.chars().zip(self.text.chars()).filter(|(a, b)| a == b).count()
    }
}

/// Runs `rec` over every manifest image, in manifest order.
pub fn run_corpus(dir: &Path, rows: &[ManifestRow], rec: &Recognizer, exec: Execution) -> Result<Vec<ImageOutcome>, EvalError> {
    map_ordered(rows, exec, |row| {
        let wrap = |source: PipelineError| EvalError::Image { file: row.file.clone(), source };
        let img = load_color(&dir.join(&row.file)).map_err(|e| wrap(e.into()))?;
        let res = rec.recognize(&img, &row.file, None).map_err(wrap)?;
        let iou = res.bbox.map_or(0.0, |b| b.iou(&row.bbox()));
        log::debug!("{}: iou {iou:.3}, text {:?} (truth {:?})", row.file, res.text, row.text);
        Ok(ImageOutcome { file: row.file.clone(), iou, truth: row.text.clone(), text: res.text })
    })
    .into_iter()
    .collect()
}

fn localization_row(mode: &str, config: impl Into<String>, outcomes: &[ImageOutcome]) -> EvalRow {
    EvalRow::new(mode, config, outcomes.len(), outcomes.iter().filter(|o| o.localized()).count())
}

/// Evaluates the corpus in `dir` (images plus `manifest.csv`; the strategy
/// mode reads the `glyphs/` set instead).
pub fn evaluate(
    dir: &Path,
    cfg: &PipelineConfig,
    mode: EvalMode,
    model: Option<&KnnModel>,
    opts: EvalOptions,
) -> Result<EvalReport, EvalError> {
    if mode == EvalMode::Strategy {
        let samples = load_glyph_dataset(&dir.join(GLYPH_DIR))?;
        let k = if cfg.k > 0 { cfg.k } else { 2 };
        let rows = evaluate_strategies(&samples, k, cfg.normalize, opts)?;
        return Ok(EvalReport { corpus_size: samples.len(), rows });
    }
    let manifest = read_manifest(dir)?;
    let name = mode.name();
    let rows = match mode {
        EvalMode::Localization => {
            let rec = Recognizer::new(cfg.clone(), None)?;
            let located = locate_corpus(dir, &manifest, &rec, opts.exec)?;
            vec![localization_row(name, "default", &located)]
        }
        EvalMode::Recognition => {
            let model = model.ok_or(EvalError::NoModel)?;
            let rec = Recognizer::new(cfg.clone(), Some(model.clone()))?;
            let out = run_corpus(dir, &manifest, &rec, opts.exec)?;
            let chars: usize = out.iter().map(|o| o.truth.chars().count()).sum();
            let good: usize = out.iter().map(ImageOutcome::matching_chars).sum();
            let strings = out.iter().filter(|o| o.text == o.truth).count();
            vec![
                localization_row(name, "localization", &out),
                EvalRow::new(name, "characters", chars, good),
                EvalRow::new(name, "strings", out.len(), strings),
            ]
        }
        EvalMode::ThresholdSweep => {
            let modes = [ThresholdMode::Fixed(0.4), ThresholdMode::Fixed(0.7), ThresholdMode::Adaptive];
            let mut rows = Vec::new();
            for t in modes {
                let mut c = cfg.clone();
                c.threshold = t;
                let rec = Recognizer::new(c, None)?;
                rows.push(localization_row(name, t.label(), &locate_corpus(dir, &manifest, &rec, opts.exec)?));
            }
            rows
        }
        EvalMode::OperatorCompare => {
            let mut rows = Vec::new();
            for op in EdgeOperator::ALL {
                let mut c = cfg.clone();
                c.edge_operator = op;
                let rec = Recognizer::new(c, None)?;
                rows.push(localization_row(name, op.name(), &locate_corpus(dir, &manifest, &rec, opts.exec)?));
            }
            rows
        }
        EvalMode::Strategy => unreachable!("handled above"),
    };
    Ok(EvalReport { corpus_size: manifest.len(), rows })
}

/// Localization only; the text field of each outcome is left empty.
fn locate_corpus(dir: &Path, rows: &[ManifestRow], rec: &Recognizer, exec: Execution) -> Result<Vec<ImageOutcome>, EvalError> {
    map_ordered(rows, exec, |row| {
        let wrap = |source: PipelineError| EvalError::Image { file: row.file.clone(), source };
        let img = load_color(&dir.join(&row.file)).map_err(|e| wrap(e.into()))?;
        let located = rec.locate(&img, None).map_err(wrap)?;
        let iou = located.plate.map_or(0.0, |p| p.bbox.iou(&row.bbox()));
        Ok(ImageOutcome { file: row.file.clone(), iou, truth: row.text.clone(), text: String::new() })
    })
    .into_iter()
    .collect()
}

/// Labeled glyphs cut from corpus images by the pipeline itself, labeled
/// left to right from the manifest text. Images whose plate is missed or
/// whose glyph count differs from the text length are skipped; their
/// number is returned alongside the samples.
pub fn harvest_corpus_glyphs(
    dir: &Path,
    rows: &[ManifestRow],
    cfg: &PipelineConfig,
    exec: Execution,
) -> Result<(Vec<(String, BinaryImage)>, usize), EvalError> {
    let rec = Recognizer::new(cfg.clone(), None)?;
    type Harvest = Result<Option<Vec<(String, BinaryImage)>>, EvalError>;
    let per_image = map_ordered(rows, exec, |row| -> Harvest {
        let wrap = |source: PipelineError| EvalError::Image { file: row.file.clone(), source };
        let img = load_color(&dir.join(&row.file)).map_err(|e| wrap(e.into()))?;
        let Some(plate) = rec.locate(&img, None).map_err(wrap)?.plate else {
            log::debug!("{}: no plate found; skipped", row.file);
            return Ok(None);
        };
        let glyphs = segment_chars(&prepare_plate(&plate.crop, &cfg.segment), &cfg.segment);
        if glyphs.len() != row.text.chars().count() {
            log::debug!("{}: {} glyphs for {:?}; skipped", row.file, glyphs.len(), row.text);
            return Ok(None);
        }
        Ok(Some(row.text.chars().zip(glyphs).map(|(ch, g)| (ch.to_string(), g.pixels)).collect::<Vec<_>>()))
    });
    let mut samples = Vec::new();
    let mut skipped = 0;
    for r in per_image {
        match r? {
            Some(s) => samples.extend(s),
            None => skipped += 1,
        }
    }
    Ok((samples, skipped))
}

/// A train/test split, as a fraction of each label used for training.
/// `None` trains and tests on everything.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Strategy {
    pub name: &'static str,
    pub train_fraction: Option<f64>,
}

pub const STRATEGIES: [Strategy; 3] = [
    Strategy { name: "A", train_fraction: Some(0.7) },
    Strategy { name: "B", train_fraction: Some(0.8) },
    Strategy { name: "C", train_fraction: None },
];

/// Splits sample indices per label after a seeded shuffle. Every label with
/// at least two samples keeps at least one on each side.
pub fn stratified_split(labels: &[&str], train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_label.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for idx in by_label.values_mut() {
        idx.shuffle(&mut rng);
        let n = idx.len();
        let mut cut = (train_fraction * n as f64).round() as usize;
        if n >= 2 {
            cut = cut.clamp(1, n - 1);
        } else {
            cut = n;
        }
        train.extend_from_slice(&idx[..cut]);
        test.extend_from_slice(&idx[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Features for every sample, in input order.
pub fn sample_features(samples: &[(String, BinaryImage)], exec: Execution) -> Result<Vec<FeatureVector>, EvalError> {
    let idx: Vec<usize> = (0..samples.len()).collect();
    map_ordered(&idx, exec, |&i| {
        extract_features(&samples[i].1).map_err(|source| EvalError::Feature { index: i, label: samples[i].0.clone(), source })
    })
    .into_iter()
    .collect()
}

/// Correct test classifications when training on `train` and testing on `test`.
pub fn split_accuracy(
    labels: &[&str],
    feats: &[FeatureVector],
    train: &[usize],
    test: &[usize],
    k: usize,
    normalize: bool,
    exec: Execution,
) -> Result<(usize, bool), EvalError> {
    let entries: Vec<Entry> = train.iter().map(|&i| Entry { label: labels[i].to_string(), features: feats[i] }).collect();
    let mut model = KnnModel::new(k, entries)?;
    let consistent = model.label_consistent();
    let scaler = normalize.then(|| MinMax::fit(&model));
    if let Some(s) = &scaler {
        model = s.apply_model(&model);
    }
    let hits = map_ordered(test, exec, |&i| {
        let q = scaler.as_ref().map_or(feats[i], |s| s.apply(&feats[i]));
        model.classify(&q).label == labels[i]
    });
    Ok((hits.into_iter().filter(|&h| h).count(), consistent))
}

/// Rows for strategies A, B and C at k = 1 and at `k`, followed by a
/// `C:label_consistent` row (1 of 1 when no two identical feature vectors
/// carry different labels).
pub fn evaluate_strategies(
    samples: &[(String, BinaryImage)],
    k: usize,
    normalize: bool,
    opts: EvalOptions,
) -> Result<Vec<EvalRow>, EvalError> {
    let feats = sample_features(samples, opts.exec)?;
    let labels: Vec<&str> = samples.iter().map(|s| s.0.as_str()).collect();
    let mut ks = vec![1];
    if k != 1 {
        ks.push(k);
    }
    let mut rows = Vec::new();
    let mut consistent = true;
    for s in STRATEGIES {
        let (train, test) = match s.train_fraction {
            Some(f) => stratified_split(&labels, f, opts.seed),
            None => ((0..labels.len()).collect(), (0..labels.len()).collect()),
        };
        for &kk in &ks {
            let (hits, ok) = split_accuracy(&labels, &feats, &train, &test, kk, normalize, opts.exec)?;
            if s.train_fraction.is_none() {
                consistent = ok;
            }
            rows.push(EvalRow::new("strategy", format!("{}:k={kk}", s.name), test.len(), hits));
        }
    }
    rows.push(EvalRow::new("strategy", "C:label_consistent", 1, usize::from(consistent)));
    Ok(rows)
}
