//! k-nearest-neighbour character classifier and its text model format.
//!
//! Model file layout (UTF-8, `\n` line ends):
//!
//! ```text
//! knn-model v1 k=<int> n=<int>
//! <label>\t<f64> <f64> ... (36 values)
//! ```
//!
//! A label is written raw when it is a single character and as `[token]`
//! otherwise. Values use Rust's shortest round-trip formatting, so a
//! written model reloads bit-for-bit.

use crate::exec::{map_ordered, Execution};
use crate::features::{extract_features, FeatureError, FeatureVector, DIM, MAX_ANGLE, MAX_DISTANCE, NUM_FRAMES};
use crate::raster::BinaryImage;
use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KnnError {
    #[error("the model has no entries")]
    EmptyModel,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("k = {k} exceeds the {n} stored entries")]
    KTooLarge { k: usize, n: usize },
    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid label {0:?}: labels must be non-empty and free of tabs and line breaks")]
    BadLabel(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] KnnError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl ModelFileError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ModelFileError::Parse { line, .. } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub label: String,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    k: usize,
    entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub label: String,
    pub votes: usize,
    /// Mean distance from the query to the k neighbours.
    pub mean_distance: f64,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> Result<f64, KnnError> {
    if a.len() != b.len() {
        return Err(KnnError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

fn check_label(label: &str) -> Result<(), KnnError> {
    if label.is_empty() || label.contains(['\t', '\n', '\r']) {
        return Err(KnnError::BadLabel(label.to_string()));
    }
    Ok(())
}

impl KnnModel {
    pub fn new(k: usize, entries: Vec<Entry>) -> Result<Self, KnnError> {
        if entries.is_empty() {
            return Err(KnnError::EmptyModel);
        }
        if k == 0 {
            return Err(KnnError::ZeroK);
        }
        if k > entries.len() {
            return Err(KnnError::KTooLarge { k, n: entries.len() });
        }
        for e in &entries {
            check_label(&e.label)?;
        }
        Ok(KnnModel { k, entries })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn with_k(&self, k: usize) -> Result<Self, KnnError> {
        KnnModel::new(k, self.entries.clone())
    }

    /// Distinct labels in first-seen order.
    pub fn labels(&self) -> Vec<&str> {
        let mut seen: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !seen.contains(&e.label.as_str()) {
                seen.push(&e.label);
            }
        }
        seen
    }

    /// True when no two identical feature vectors carry different labels.
    pub fn label_consistent(&self) -> bool {
        let mut sorted: Vec<&Entry> = self.entries.iter().collect();
        sorted.sort_by(|a, b| cmp_vectors(&a.features, &b.features));
        sorted
            .windows(2)
            .all(|p| p[0].features != p[1].features || p[0].label == p[1].label)
    }

    pub fn classify(&self, q: &FeatureVector) -> Classification {
        let mut dist: Vec<(f64, usize)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (euclidean(&e.features.0, &q.0).expect("fixed length"), i))
            .collect();
        let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        let k = self.k;
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, by_distance);
            dist.truncate(k);
        }
        dist.sort_by(by_distance);
        // Votes in order of first appearance among the sorted neighbours, so
        // a tie goes to the label whose nearest member is closest.
        let mut tally: Vec<(&str, usize)> = Vec::new();
        for &(_, i) in &dist {
            let label = self.entries[i].label.as_str();
            match tally.iter_mut().find(|(l, _)| *l == label) {
                Some(t) => t.1 += 1,
                None => tally.push((label, 1)),
            }
        }
        let best = tally.iter().map(|t| t.1).max().unwrap_or(0);
        let (label, votes) = tally.into_iter().find(|t| t.1 == best).expect("k >= 1");
        Classification {
            label: label.to_string(),
            votes,
            mean_distance: dist.iter().map(|d| d.0).sum::<f64>() / k as f64,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("knn-model v1 k={} n={}\n", self.k, self.entries.len());
        for e in &self.entries {
            if e.label.chars().count() == 1 {
                out.push_str(&e.label);
            } else {
                let _ = write!(out, "[{}]", e.label);
            }
            for (i, v) in e.features.0.iter().enumerate() {
                out.push(if i == 0 { '\t' } else { ' ' });
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ModelFileError> {
        let err = |line: usize, message: String| ModelFileError::Parse { line, message };
        let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)));
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
        let (k, n) = parse_header(header).map_err(|m| err(1, m))?;
        let mut entries = Vec::with_capacity(n);
        let mut trailing_blank = None;
        for (no, line) in lines {
            if line.is_empty() {
                trailing_blank.get_or_insert(no);
                continue;
            }
            if let Some(blank) = trailing_blank {
                return Err(err(blank, "blank line inside the entry list".into()));
            }
            entries.push(parse_entry(line).map_err(|m| err(no, m))?);
        }
        if entries.len() != n {
            let line = trailing_blank.unwrap_or(entries.len() + 2);
            return Err(err(line, format!("header promises n={n} entries, found {}", entries.len())));
        }
        KnnModel::new(k, entries).map_err(|e| match e {
            KnnError::KTooLarge { .. } | KnnError::ZeroK | KnnError::EmptyModel => err(1, e.to_string()),
            other => ModelFileError::Model(other),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelFileError> {
        std::fs::write(path, self.to_text())
            .map_err(|source| ModelFileError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, ModelFileError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ModelFileError::Io { path: path.display().to_string(), source })?;
        KnnModel::from_text(&text)
    }
}

fn cmp_vectors(a: &FeatureVector, b: &FeatureVector) -> Ordering {
    a.0.iter()
        .zip(&b.0)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn parse_header(line: &str) -> Result<(usize, usize), String> {
    let parts: Vec<&str> = line.split(' ').collect();
    let bad = || format!("expected header `knn-model v1 k=<int> n=<int>`, got {line:?}");
    if parts.len() != 4 || parts[0] != "knn-model" || parts[1] != "v1" {
        return Err(bad());
    }
    let num = |p: &str, key: &str| p.strip_prefix(key).and_then(|v| v.parse::<usize>().ok());
    match (num(parts[2], "k="), num(parts[3], "n=")) {
        (Some(k), Some(n)) => Ok((k, n)),
        _ => Err(bad()),
    }
}

fn parse_entry(line: &str) -> Result<Entry, String> {
    let (label, values) = line.split_once('\t').ok_or("missing tab between label and features")?;
    let label = if label.chars().count() == 1 {
        label.to_string()
    } else if let Some(inner) = label.strip_prefix('[').and_then(|l| l.strip_suffix(']')).filter(|i| !i.is_empty()) {
        inner.to_string()
    } else {
        return Err(format!("label {label:?} must be one character or a bracketed token"));
    };
    let tokens: Vec<&str> = values.split(' ').collect();
    if tokens.len() != DIM {
        return Err(format!("expected {DIM} feature values, found {}", tokens.len()));
    }
    let mut v = [0.0; DIM];
    for (i, t) in tokens.iter().enumerate() {
        let x: f64 = t.parse().map_err(|_| format!("feature {} is not a number: {t:?}", i + 1))?;
        let hi = if i < NUM_FRAMES { MAX_DISTANCE } else { MAX_ANGLE };
        if !(0.0..=hi + 1e-9).contains(&x) {
            return Err(format!("feature {} = {x} is outside [0, {hi}]", i + 1));
        }
        v[i] = x;
    }
    Ok(Entry { label, features: FeatureVector(v) })
}

/// Builds a model from labeled glyphs; feature extraction runs under `exec`.
pub fn train(samples: &[(String, BinaryImage)], k: usize, exec: Execution) -> Result<KnnModel, KnnError> {
    if samples.is_empty() {
        return Err(KnnError::EmptyModel);
    }
    let feats = map_ordered(samples, exec, |(_, g)| extract_features(g));
    let entries = samples
        .iter()
        .zip(feats)
        .map(|((label, _), f)| Ok(Entry { label: label.clone(), features: f? }))
        .collect::<Result<Vec<_>, KnnError>>()?;
    KnnModel::new(k, entries)
}

/// Per-component min-max scaling fitted on a model's entries.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMax {
    lo: [f64; DIM],
    span: [f64; DIM],
}

impl MinMax {
    pub fn fit(model: &KnnModel) -> Self {
        let mut lo = [f64::INFINITY; DIM];
        let mut hi = [f64::NEG_INFINITY; DIM];
        for e in model.entries() {
            for i in 0..DIM {
                lo[i] = lo[i].min(e.features.0[i]);
                hi[i] = hi[i].max(e.features.0[i]);
            }
        }
        let mut span = [1.0; DIM];
        for i in 0..DIM {
            if hi[i] > lo[i] {
                span[i] = hi[i] - lo[i];
            }
        }
        MinMax { lo, span }
    }

    pub fn apply(&self, v: &FeatureVector) -> FeatureVector {
        FeatureVector(std::array::from_fn(|i| (v.0[i] - self.lo[i]) / self.span[i]))
    }

    pub fn apply_model(&self, model: &KnnModel) -> KnnModel {
        let entries = model
            .entries()
            .iter()
            .map(|e| Entry { label: e.label.clone(), features: self.apply(&e.features) })
            .collect();
        KnnModel { k: model.k, entries }
    }
}
