//! End-to-end recognition: reconstruction, binarization, edge/morphology
//! plate search, deskew, segmentation, features, k-NN and plate colour.

use crate::color::{classify_pixels, PlateType};
use crate::config::{JumpSource, PipelineConfig, ThresholdMode};
use crate::edges::{binarize_edges, EdgeError, EdgeMap};
use crate::exec::Execution;
use crate::features::{extract_features, FeatureError};
use crate::io::{load_color, LoadError};
use crate::knn::{KnnError, KnnModel, MinMax};
use crate::labeling::{label_components, Connectivity, LabeledRegions};
use crate::locate::{best_accepted, extract_plate, score_candidates, LocateError, PlateCandidate, PlateRegion, Verdict};
use crate::morphology::{dilate, erode, fill_holes};
use crate::pnm::{self, PnmError};
use crate::preprocess::{adaptive_threshold, fixed_threshold, gaussian_smooth, to_grayscale, PreprocessError};
use crate::raster::{BinaryImage, ColorImage, GrayImage, Rect};
use crate::segment::{prepare_plate, segment_chars, wide_glyphs, CharGlyph};
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Edge(#[from] EdgeError),
    #[error(transparent)]
    Locate(#[from] LocateError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Knn(#[from] KnnError),
    #[error("{count} character(s) were segmented but no recognition model is loaded")]
    NoModel { count: usize },
}

/// Intermediate images kept for inspection, in stage order.
#[derive(Debug, Default, Clone)]
pub struct Trace {
    pub stages: Vec<(String, Artifact)>,
}

#[derive(Debug, Clone)]
pub enum Artifact {
    Gray(GrayImage),
    Binary(BinaryImage),
    Edges(EdgeMap),
    Labels(LabeledRegions),
    /// Colour rendering, such as the candidate overlay.
    Color(ColorImage),
    /// CSV text.
    Table(String),
}

impl Trace {
    fn push(&mut self, name: &str, artifact: Artifact) {
        self.stages.push((name.to_string(), artifact));
    }

    /// Writes every artifact as `NN_name.pgm` or `NN_name.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), PnmError> {
        std::fs::create_dir_all(dir)?;
        for (i, (name, artifact)) in self.stages.iter().enumerate() {
            let stem = format!("{i:02}_{name}");
            match artifact {
                Artifact::Gray(g) => pnm::write_gray(&dir.join(format!("{stem}.pgm")), g)?,
                Artifact::Binary(b) => pnm::write_binary(&dir.join(format!("{stem}.pgm")), b)?,
                Artifact::Edges(e) => {
                    std::fs::write(dir.join(format!("{stem}.pgm")), pnm::encode_pgm(e.width(), e.height(), &e.to_u8()))?
                }
                Artifact::Labels(l) => {
                    std::fs::write(dir.join(format!("{stem}.pgm")), pnm::encode_pgm(l.width(), l.height(), &l.to_u8()))?
                }
                Artifact::Color(c) => pnm::write_color(&dir.join(format!("{stem}.ppm")), c)?,
                Artifact::Table(t) => std::fs::write(dir.join(format!("{stem}.csv")), t)?,
            }
        }
        Ok(())
    }
}

fn candidates_table(scored: &[(PlateCandidate, Verdict)], min_jumps: u32) -> String {
    let mut out = String::from("label,row0,col0,row1,col1,area,frame_width,frame_height,jump_run,aspect_ratio,fill_density,tilt_degrees,verdict\n");
    for (c, v) in scored {
        let verdict = match v {
            Verdict::Accept => "accept".to_string(),
            Verdict::Reject(r) => r.to_string(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{:.4},{:.4},{:.3},{}",
            c.label,
            c.bbox.row0,
            c.bbox.col0,
            c.bbox.row1,
            c.bbox.col1,
            c.area,
            c.frame_width,
            c.frame_height,
            crate::locate::longest_jump_run(&c.jump_profile, min_jumps),
            c.aspect_ratio,
            c.fill_density,
            c.tilt_degrees,
            verdict
        );
    }
    out
}

const ACCEPTED: [u8; 3] = [0, 200, 0];
const REJECTED: [u8; 3] = [220, 0, 0];
const CHOSEN: [u8; 3] = [0, 160, 255];

fn outline(img: &mut ColorImage, r: Rect, rgb: [u8; 3]) {
    for c in r.col0..=r.col1 {
        img.set(r.row0, c, rgb);
        img.set(r.row1, c, rgb);
    }
    for row in r.row0..=r.row1 {
        img.set(row, r.col0, rgb);
        img.set(row, r.col1, rgb);
    }
}

/// The input with every candidate box drawn: green accepted, red rejected.
fn candidate_overlay(img: &ColorImage, scored: &[(PlateCandidate, Verdict)]) -> ColorImage {
    let mut out = img.clone();
    for (c, v) in scored {
        outline(&mut out, c.bbox, if v.is_accept() { ACCEPTED } else { REJECTED });
    }
    out
}

/// Wall-clock time per stage in whole microseconds, in execution order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Timings {
    pub stages: Vec<(&'static str, u64)>,
}

impl Timings {
    fn time<T>(&mut self, name: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.stages.push((name, start.elapsed().as_micros() as u64));
        out
    }

    pub fn sum(&self) -> u64 {
        self.stages.iter().map(|s| s.1).sum()
    }
}

/// Outcome of the localization stages.
#[derive(Debug, Clone)]
pub struct Located {
    pub plate: Option<PlateRegion>,
    pub timings: Timings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlateResult {
    pub source: String,
    pub found: bool,
    pub bbox: Option<Rect>,
    pub tilt_degrees: f64,
    pub corners: Option<[(f64, f64); 4]>,
    /// One label per glyph, left to right.
    pub text: String,
    /// Mean distance to the k nearest neighbours, per glyph.
    pub distances: Vec<f64>,
    pub plate_type: PlateType,
    pub timings: Timings,
    pub total_us: u64,
    pub warnings: Vec<String>,
}

impl PlateResult {
    fn not_found(source: &str, timings: Timings, total_us: u64) -> Self {
        PlateResult {
            source: source.to_string(),
            found: false,
            bbox: None,
            tilt_degrees: 0.0,
            corners: None,
            text: String::new(),
            distances: Vec::new(),
            plate_type: PlateType::from_counts([0, 0, 0]),
            timings,
            total_us,
            warnings: Vec::new(),
        }
    }

    /// One `key: value` line per field; timings are deliberately last so
    /// that everything above them is reproducible run to run.
    pub fn to_record(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "source: {}", self.source);
        let _ = writeln!(out, "found: {}", self.found);
        match self.bbox {
            Some(b) => {
                let _ = writeln!(out, "bbox: {} {} {} {}", b.row0, b.col0, b.row1, b.col1);
            }
            None => out.push_str("bbox: -\n"),
        }
        let _ = writeln!(out, "tilt_degrees: {:.3}", self.tilt_degrees);
        match self.corners {
            Some(cs) => {
                let pts: Vec<String> = cs.iter().map(|(r, c)| format!("{r:.1},{c:.1}")).collect();
                let _ = writeln!(out, "corners: {}", pts.join(" "));
            }
            None => out.push_str("corners: -\n"),
        }
        let _ = writeln!(out, "text: {}", self.text);
        let _ = writeln!(out, "glyphs: {}", self.text.chars().count());
        let d: Vec<String> = self.distances.iter().map(|d| format!("{d:.4}")).collect();
        let _ = writeln!(out, "distances: {}", d.join(" "));
        let _ = writeln!(out, "plate_type: {}", self.plate_type.kind);
        let [r, y, w] = self.plate_type.counts;
        let _ = writeln!(out, "color_counts: red={r} yellow={y} white={w}");
        for warning in &self.warnings {
            let _ = writeln!(out, "warning: {warning}");
        }
        for (name, us) in &self.timings.stages {
            let _ = writeln!(out, "time_{name}_us: {us}");
        }
        let _ = writeln!(out, "time_total_us: {}", self.total_us);
        out
    }
}

/// A configured pipeline with an optional recognition model.
#[derive(Debug, Clone)]
pub struct Recognizer {
    config: PipelineConfig,
    model: Option<KnnModel>,
    scaler: Option<MinMax>,
}

impl Recognizer {
    /// Applies `config.k` (when non-zero) and feature normalization to `model`.
    pub fn new(config: PipelineConfig, model: Option<KnnModel>) -> Result<Self, PipelineError> {
        let model = match model {
            Some(m) if config.k > 0 && config.k != m.k() => Some(m.with_k(config.k)?),
            other => other,
        };
        let (model, scaler) = match model {
            Some(m) if config.normalize => {
                let s = MinMax::fit(&m);
                (Some(s.apply_model(&m)), Some(s))
            }
            other => (other, None),
        };
        Ok(Recognizer { config, model, scaler })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn model(&self) -> Option<&KnnModel> {
        self.model.as_ref()
    }

    /// Runs the localization stages only.
    pub fn locate(&self, img: &ColorImage, mut trace: Option<&mut Trace>) -> Result<Located, PipelineError> {
        let cfg = &self.config;
        let mut t = Timings::default();
        let smooth = t.time("preprocess", || gaussian_smooth(&to_grayscale(img), cfg.gaussian_sigma, cfg.gaussian_radius))?;
        let binary = t.time("threshold", || match cfg.threshold {
            ThresholdMode::Adaptive => Ok(adaptive_threshold(&smooth)),
            ThresholdMode::Fixed(v) => fixed_threshold(&smooth, v),
        })?;
        let (edges, edge_bin) = t.time("edges", || {
            let op = cfg.edge_operator.gradient(cfg.edge_direction);
            let em = op.apply(&binary);
            let cut = cfg.edge_cut.threshold(&op, &em);
            binarize_edges(&em, cut).map(|b| (em, b))
        })?;
        let (opened, filled) = t.time("morphology", || {
            let opened = dilate(&erode(&edge_bin, &cfg.erode_se), &cfg.dilate_se);
            let filled = fill_holes(&opened);
            (opened, filled)
        });
        let regions = t.time("label", || label_components(&filled, Connectivity::Eight));
        let jump_src = match cfg.jump_source {
            JumpSource::Binary => &binary,
            JumpSource::Edges => &edge_bin,
        };
        let exec = Execution::Sequential;
        let scored = t.time("select", || score_candidates(&regions, jump_src, &cfg.locator, exec));
        if let Some(tr) = trace.as_deref_mut() {
            tr.push("gray", Artifact::Gray(smooth.clone()));
            tr.push("binary", Artifact::Binary(binary.clone()));
            tr.push("edges", Artifact::Edges(edges));
            tr.push("edges_binary", Artifact::Binary(edge_bin.clone()));
            tr.push("opened", Artifact::Binary(opened));
            tr.push("filled", Artifact::Binary(filled));
            tr.push("labels", Artifact::Labels(regions.clone()));
            tr.push("candidates", Artifact::Table(candidates_table(&scored, cfg.locator.min_jumps)));
        }
        let mut overlay = trace.is_some().then(|| candidate_overlay(img, &scored));
        let chosen = best_accepted(scored);
        if let (Some(o), Some(c)) = (overlay.as_mut(), &chosen) {
            outline(o, c.bbox.expand(2, o.width(), o.height()), CHOSEN);
        }
        if let (Some(tr), Some(o)) = (trace.as_deref_mut(), overlay) {
            tr.push("overlay", Artifact::Color(o));
        }
        let plate = match chosen {
            Some(c) => Some(t.time("deskew", || extract_plate(&smooth, &binary, &c, &cfg.locator))?),
            None => None,
        };
        if let (Some(tr), Some(p)) = (trace, &plate) {
            tr.push("plate", Artifact::Gray(p.crop.clone()));
            tr.push("plate_mask", Artifact::Binary(p.mask.clone()));
        }
        Ok(Located { plate, timings: t })
    }

    /// Runs the whole pipeline on a decoded image. Fails with
    /// [`PipelineError::NoModel`] when glyphs were found but no model is loaded.
    pub fn recognize(&self, img: &ColorImage, source: &str, trace: Option<&mut Trace>) -> Result<PlateResult, PipelineError> {
        self.run(img, source, trace, true)
    }

    /// Localization, segmentation and colour without classification; `text`
    /// stays empty.
    pub fn analyze(&self, img: &ColorImage, source: &str, trace: Option<&mut Trace>) -> Result<PlateResult, PipelineError> {
        self.run(img, source, trace, false)
    }

    fn run(&self, img: &ColorImage, source: &str, mut trace: Option<&mut Trace>, classify: bool) -> Result<PlateResult, PipelineError> {
        let start = Instant::now();
        let located = self.locate(img, trace.as_deref_mut())?;
        let mut t = located.timings;
        let Some(plate) = located.plate else {
            return Ok(PlateResult::not_found(source, t, start.elapsed().as_micros() as u64));
        };
        let cfg = &self.config;
        let glyphs: Vec<CharGlyph> = t.time("segment", || segment_chars(&prepare_plate(&plate.crop, &cfg.segment), &cfg.segment));
        let mut warnings = Vec::new();
        for i in wide_glyphs(&glyphs, &cfg.segment) {
            warnings.push(format!("glyph {i} is unusually wide; neighbouring characters may have merged"));
        }
        if let Some(tr) = trace {
            for g in &glyphs {
                tr.push(&format!("glyph_{:02}", g.order_index), Artifact::Binary(g.pixels.clone()));
            }
        }
        let (text, distances) = if glyphs.is_empty() || !classify {
            (String::new(), Vec::new())
        } else {
            let model = self.model.as_ref().ok_or(PipelineError::NoModel { count: glyphs.len() })?;
            let feats = t.time("features", || glyphs.iter().map(|g| extract_features(&g.pixels)).collect::<Result<Vec<_>, _>>())?;
            t.time("classify", || {
                let mut text = String::new();
                let mut distances = Vec::with_capacity(feats.len());
                for f in &feats {
                    let q = match &self.scaler {
                        Some(s) => s.apply(f),
                        None => *f,
                    };
                    let c = model.classify(&q);
                    text.push_str(&c.label);
                    distances.push(c.mean_distance);
                }
                (text, distances)
            })
        };
        let plate_type = t.time("color", || {
            let b = plate.bbox;
            let pixels = (b.row0..=b.row1).flat_map(|r| (b.col0..=b.col1).map(move |c| (r, c)));
            let under: Vec<[u8; 3]> = pixels
                .filter(|&(r, c)| plate.mask.is_set(r - b.row0, c - b.col0))
                .map(|(r, c)| img.get(r, c))
                .collect();
            classify_pixels(&under, &cfg.color)
        });
        Ok(PlateResult {
            source: source.to_string(),
            found: true,
            bbox: Some(plate.bbox),
            tilt_degrees: plate.tilt_degrees,
            corners: Some(plate.corners),
            text,
            distances,
            plate_type,
            timings: t,
            total_us: start.elapsed().as_micros() as u64,
            warnings,
        })
    }

    pub fn recognize_file(&self, path: &Path, trace: Option<&mut Trace>) -> Result<PlateResult, PipelineError> {
        let img = load_color(path)?;
        self.recognize(&img, &path.display().to_string(), trace)
    }

    pub fn analyze_file(&self, path: &Path, trace: Option<&mut Trace>) -> Result<PlateResult, PipelineError> {
        let img = load_color(path)?;
        self.analyze(&img, &path.display().to_string(), trace)
    }
}
