//! Synthetic scenes: a plate on a car body over a textured background, with
//! a ground-truth manifest, plus isolated-glyph datasets for training.

use super::font::{self, ALPHABET};
use crate::color::PlateKind;
use crate::exec::{map_range, Execution};
use crate::hsv::{hsv_to_rgb, HsvPixel};
use crate::pnm::{self, PnmError};
use crate::config::PipelineConfig;
use crate::pipeline::Recognizer;
use crate::raster::{BinaryImage, ColorImage, Rect};
use crate::segment::{prepare_plate, segment_chars, SegmentConfig};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

pub const MANIFEST: &str = "manifest.csv";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid corpus spec: {0}")]
    Spec(String),
    #[error("character {0:?} is not in the synthetic font")]
    UnknownChar(char),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Pnm { path: PathBuf, source: PnmError },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: manifest has no rows")]
    EmptyManifest { path: PathBuf },
    #[error("harvesting plate {plate:?} produced {found} glyphs instead of {expected}")]
    GlyphHarvest { plate: String, expected: usize, found: usize },
}

/// Global illumination applied to a rendered scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Brightness {
    Dark,
    Normal,
    Bright,
}

impl Brightness {
    pub const ALL: [Brightness; 3] = [Brightness::Dark, Brightness::Normal, Brightness::Bright];

    pub fn name(&self) -> &'static str {
        match self {
            Brightness::Dark => "dark",
            Brightness::Normal => "normal",
            Brightness::Bright => "bright",
        }
    }

    /// Maps a linear intensity in `[0, 1]`.
    pub fn apply(&self, v: f64) -> f64 {
        match self {
            Brightness::Dark => 0.4 * v,
            Brightness::Normal => v,
            Brightness::Bright => 0.35 + 0.65 * v,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.name() == s)
    }
}

impl fmt::Display for Brightness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Plate field colour in linear `[0, 1]` RGB. Coloured plates sit in the
/// middle of the default hue bands used by the colour classifier.
pub fn plate_rgb(kind: PlateKind) -> [f64; 3] {
    let hsv = |h, s, v| {
        let p = hsv_to_rgb(HsvPixel { h, s, v });
        [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0]
    };
    match kind {
        PlateKind::Yellow => hsv(0.66, 0.55, 0.95),
        PlateKind::Red => hsv(0.87, 0.55, 0.95),
        PlateKind::White | PlateKind::Unknown => [0.92, 0.92, 0.9],
    }
}

const INK: [f64; 3] = [0.04, 0.04, 0.05];
const BODY: [f64; 3] = [0.085, 0.09, 0.1];
const BACKGROUND: f64 = 0.1;
const TEXTURE: f64 = 0.008;

/// Plate geometry derived from its width, in plate pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateLayout {
    pub width: f64,
    pub height: f64,
    pub glyph_height: f64,
    pub glyph_width: f64,
    pub pen: f64,
    pub side_margin: f64,
    pub body_margin: f64,
}

impl PlateLayout {
    pub fn for_width(width: f64) -> Self {
        let height = 0.23 * width;
        let glyph_height = 0.66 * height;
        PlateLayout {
            width,
            height,
            glyph_height,
            glyph_width: 0.5 * glyph_height,
            pen: 0.13 * glyph_height,
            side_margin: 0.07 * width,
            body_margin: 0.13 * width,
        }
    }

    /// Left edge of glyph `i` of `n`, relative to the plate's left edge.
    /// Characters sit on a grid of at least eight slots; shorter texts are
    /// centred on it, longer ones squeeze the gaps.
    fn glyph_left(&self, i: usize, n: usize) -> f64 {
        let slots = n.max(8);
        let free = self.width - 2.0 * self.side_margin - slots as f64 * self.glyph_width;
        let pitch = self.glyph_width + free / (slots - 1) as f64;
        let offset = (slots - n) as f64 * pitch / 2.0;
        self.side_margin + offset + i as f64 * pitch
    }
}

/// Everything that determines one rendered scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image_width: usize,
    pub image_height: usize,
    pub text: String,
    pub layout: PlateLayout,
    /// Plate centre `(x, y)` in image pixels.
    pub center: (f64, f64),
    /// Counter-clockwise plate rotation in degrees.
    pub tilt_degrees: f64,
    pub kind: PlateKind,
    pub brightness: Brightness,
    /// Standard deviation of additive noise in 8-bit levels.
    pub noise: f64,
    /// Background texture phases.
    pub phase: (f64, f64),
}

enum Surface {
    Ink,
    Plate,
    Body,
    Background,
}

impl Scene {
    fn surface(&self, x: f64, y: f64) -> Surface {
        let (s, c) = self.tilt_degrees.to_radians().sin_cos();
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let u = dx * c - dy * s;
        let v = dx * s + dy * c;
        let l = &self.layout;
        let (hw, hh) = (l.width / 2.0, l.height / 2.0);
        if u.abs() <= hw && v.abs() <= hh {
            let (px, py) = (u + hw, v + hh);
            let n = self.text.chars().count();
            let gy = (l.height - l.glyph_height) / 2.0;
            for (i, ch) in self.text.chars().enumerate() {
                let gx = l.glyph_left(i, n);
                if px >= gx - 1.0
                    && px <= gx + l.glyph_width + 1.0
                    && font::inked(ch, px - gx, py - gy, l.glyph_width, l.glyph_height, l.pen)
                {
                    return Surface::Ink;
                }
            }
            Surface::Plate
        } else if u.abs() <= hw + l.body_margin && v.abs() <= hh + l.body_margin {
            Surface::Body
        } else {
            Surface::Background
        }
    }

    fn background(&self, x: f64, y: f64) -> f64 {
        BACKGROUND + TEXTURE * (0.045 * x + self.phase.0).sin() * (0.06 * y + self.phase.1).sin()
    }

    /// Renders the scene with 3x3 supersampling; returns the image and the
    /// box of pixels at least half covered by the plate.
    pub fn render(&self, rng: &mut impl Rng) -> (ColorImage, Rect) {
        const SS: usize = 3;
        let (w, h) = (self.image_width, self.image_height);
        let plate = plate_rgb(self.kind);
        let noise = Normal::new(0.0, self.noise.max(0.0)).expect("finite sigma");
        let (mut r0, mut c0, mut r1, mut c1) = (usize::MAX, usize::MAX, 0, 0);
        let mut pixels = Vec::with_capacity(w * h);
        for r in 0..h {
            for c in 0..w {
                let mut acc = [0.0; 3];
                let mut on_plate = 0;
                for sy in 0..SS {
                    for sx in 0..SS {
                        let x = c as f64 + (sx as f64 + 0.5) / SS as f64;
                        let y = r as f64 + (sy as f64 + 0.5) / SS as f64;
                        let rgb = match self.surface(x, y) {
                            Surface::Ink => {
                                on_plate += 1;
                                INK
                            }
                            Surface::Plate => {
                                on_plate += 1;
                                plate
                            }
                            Surface::Body => BODY,
                            Surface::Background => [self.background(x, y); 3],
                        };
                        for k in 0..3 {
                            acc[k] += rgb[k];
                        }
                    }
                }
                if on_plate * 2 > SS * SS {
                    r0 = r0.min(r);
                    c0 = c0.min(c);
                    r1 = r1.max(r);
                    c1 = c1.max(c);
                }
                let mut px = [0u8; 3];
                for k in 0..3 {
                    let v = self.brightness.apply(acc[k] / (SS * SS) as f64) * 255.0;
                    let v = if self.noise > 0.0 { v + noise.sample(rng) } else { v };
                    px[k] = v.round().clamp(0.0, 255.0) as u8;
                }
                pixels.push(px);
            }
        }
        let img = ColorImage::new(w, h, pixels).expect("sized buffer");
        let bbox = if r0 == usize::MAX { Rect::new(0, 0, 0, 0) } else { Rect::new(r0, c0, r1, c1) };
        (img, bbox)
    }
}

/// Parameters of a generated corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub count: usize,
    pub seed: u64,
    /// Inclusive range of plate tilts in degrees.
    pub tilt: (f64, f64),
    /// Additive noise standard deviation in 8-bit levels.
    pub noise: f64,
    /// Plate kinds, cycled per group of brightness regimes.
    pub plates: Vec<PlateKind>,
    /// Brightness regimes, cycled per image.
    pub brightness: Vec<Brightness>,
    /// Fixed plate text; random characters from the font when `None`.
    pub text: Option<String>,
    pub text_len: usize,
    pub width: usize,
    pub height: usize,
    /// Plate width range in pixels.
    pub plate_width: (f64, f64),
    /// Segmented samples per character written under `glyphs/`; 0 skips them.
    pub glyphs_per_label: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            count: 20,
            seed: 1,
            tilt: (0.0, 0.0),
            noise: 0.0,
            plates: vec![PlateKind::White, PlateKind::Yellow, PlateKind::Red],
            brightness: vec![Brightness::Normal],
            text: None,
            text_len: 8,
            width: 400,
            height: 300,
            plate_width: (200.0, 250.0),
            glyphs_per_label: 0,
        }
    }
}

fn parse_range(key: &str, v: &str) -> Result<(f64, f64), SynthError> {
    let bad = || SynthError::Spec(format!("{key}: expected <lo>:<hi> or a single number, got {v:?}"));
    let (lo, hi) = match v.split_once(':') {
        Some((a, b)) => (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?),
        None => {
            let x: f64 = v.parse().map_err(|_| bad())?;
            (x, x)
        }
    };
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

impl FromStr for CorpusSpec {
    type Err = SynthError;

    /// Comma-separated `key=value` pairs, e.g.
    /// `count=50,seed=7,tilt=-10:10,noise=2,plates=white+yellow,brightness=all`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut spec = CorpusSpec::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| SynthError::Spec(format!("expected key=value, got {part:?}")))?;
            let num_err = |what: &str| SynthError::Spec(format!("{k}: expected {what}, got {v:?}"));
            match k {
                "count" => spec.count = v.parse().map_err(|_| num_err("a count"))?,
                "seed" => spec.seed = v.parse().map_err(|_| num_err("an integer"))?,
                "tilt" => spec.tilt = parse_range(k, v)?,
                "noise" => spec.noise = v.parse().map_err(|_| num_err("a number"))?,
                "plates" => {
                    spec.plates = v
                        .split('+')
                        .map(|p| PlateKind::parse(p).filter(|k| *k != PlateKind::Unknown).ok_or_else(|| num_err("red, yellow or white")))
                        .collect::<Result<_, _>>()?
                }
                "brightness" => {
                    spec.brightness = if v == "all" {
                        Brightness::ALL.to_vec()
                    } else {
                        v.split('+')
                            .map(|b| Brightness::parse(b).ok_or_else(|| num_err("dark, normal, bright or all")))
                            .collect::<Result<_, _>>()?
                    }
                }
                "text" => spec.text = Some(v.to_string()),
                "length" => spec.text_len = v.parse().map_err(|_| num_err("a count"))?,
                "size" => {
                    let (a, b) = v.split_once('x').ok_or_else(|| num_err("WIDTHxHEIGHT"))?;
                    spec.width = a.parse().map_err(|_| num_err("WIDTHxHEIGHT"))?;
                    spec.height = b.parse().map_err(|_| num_err("WIDTHxHEIGHT"))?;
                }
                "plate_width" => spec.plate_width = parse_range(k, v)?,
                "glyphs" => spec.glyphs_per_label = v.parse().map_err(|_| num_err("a count"))?,
                _ => return Err(SynthError::Spec(format!("unknown key {k:?}"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |m: &str| Err(SynthError::Spec(m.to_string()));
        if self.count == 0 {
            return err("count must be at least 1");
        }
        if self.tilt.0 < -45.0 || self.tilt.1 > 45.0 {
            return err("tilt must stay within [-45, 45]");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return err("noise must be a non-negative number");
        }
        if self.plates.is_empty() || self.brightness.is_empty() {
            return err("plates and brightness need at least one entry");
        }
        if let Some(t) = &self.text {
            if let Some(ch) = t.chars().find(|&c| font::strokes(c).is_none()) {
                return Err(SynthError::UnknownChar(ch));
            }
            if t.is_empty() {
                return err("text must not be empty");
            }
        }
        if self.text_len == 0 {
            return err("length must be at least 1");
        }
        if self.plate_width.0.is_nan() || self.plate_width.0 < 40.0 {
            return err("plate_width must be at least 40 pixels");
        }
        let widest = PlateLayout::for_width(self.plate_width.1);
        if widest.width + 2.0 * widest.body_margin > self.width as f64
            || widest.height + 2.0 * widest.body_margin > self.height as f64
        {
            return err("the image is too small for the requested plate width");
        }
        Ok(())
    }

    fn rng_for(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// Draws scene `i`. Every image has its own random stream, so scenes are
    /// independent of the order in which they are generated.
    pub fn scene(&self, i: usize) -> (Scene, ChaCha8Rng) {
        let mut rng = self.rng_for(i as u64);
        let alphabet: Vec<char> = ALPHABET.chars().collect();
        let text = match &self.text {
            Some(t) => t.clone(),
            None => (0..self.text_len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect(),
        };
        let pw = if self.plate_width.0 < self.plate_width.1 {
            rng.random_range(self.plate_width.0..=self.plate_width.1)
        } else {
            self.plate_width.0
        };
        let layout = PlateLayout::for_width(pw);
        let tilt = if self.tilt.0 < self.tilt.1 { rng.random_range(self.tilt.0..=self.tilt.1) } else { self.tilt.0 };
        let (s, c) = tilt.to_radians().sin_cos();
        let (bw, bh) = (layout.width / 2.0 + layout.body_margin, layout.height / 2.0 + layout.body_margin);
        let half_x = bw * c.abs() + bh * s.abs();
        let half_y = bw * s.abs() + bh * c.abs();
        let mut place = |extent: usize, half: f64| {
            let (lo, hi) = (half + 2.0, extent as f64 - half - 2.0);
            if lo < hi {
                rng.random_range(lo..=hi)
            } else {
                extent as f64 / 2.0
            }
        };
        let center = (place(self.width, half_x), place(self.height, half_y));
        let phase = (rng.random_range(0.0..std::f64::consts::TAU), rng.random_range(0.0..std::f64::consts::TAU));
        let scene = Scene {
            image_width: self.width,
            image_height: self.height,
            text,
            layout,
            center,
            tilt_degrees: tilt,
            kind: self.plates[(i / self.brightness.len()) % self.plates.len()],
            brightness: self.brightness[i % self.brightness.len()],
            noise: self.noise,
            phase,
        };
        (scene, rng)
    }
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub file: String,
    pub text: String,
    pub row0: usize,
    pub col0: usize,
    pub row1: usize,
    pub col1: usize,
    pub tilt_degrees: f64,
    pub plate_type: String,
    pub brightness: Brightness,
}

impl ManifestRow {
    pub fn bbox(&self) -> Rect {
        Rect::new(self.row0, self.col0, self.row1, self.col1)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io { path: path.to_owned(), source }
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<(), SynthError> {
    let csv_err = |source| SynthError::Csv { path: path.to_owned(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads `manifest.csv` from a corpus directory; an empty manifest is an error.
pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestRow>, SynthError> {
    let path = dir.join(MANIFEST);
    let csv_err = |source| SynthError::Csv { path: path.clone(), source };
    let mut r = csv::Reader::from_path(&path).map_err(csv_err)?;
    let rows = r.deserialize().collect::<Result<Vec<ManifestRow>, _>>().map_err(csv_err)?;
    if rows.is_empty() {
        return Err(SynthError::EmptyManifest { path });
    }
    Ok(rows)
}

/// Renders scene `i` of `spec` and its manifest row.
pub fn render_corpus_image(spec: &CorpusSpec, i: usize) -> (ColorImage, ManifestRow) {
    let (scene, mut rng) = spec.scene(i);
    let (img, bbox) = scene.render(&mut rng);
    let row = ManifestRow {
        file: format!("img_{i:04}.ppm"),
        text: scene.text.clone(),
        row0: bbox.row0,
        col0: bbox.col0,
        row1: bbox.row1,
        col1: bbox.col1,
        tilt_degrees: scene.tilt_degrees,
        plate_type: scene.kind.name().to_string(),
        brightness: scene.brightness,
    };
    (img, row)
}

/// Writes the images, `manifest.csv` and optionally a `glyphs/` dataset.
pub fn generate_corpus(spec: &CorpusSpec, dir: &Path, exec: Execution) -> Result<Vec<ManifestRow>, SynthError> {
    spec.validate()?;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let rows = map_range(spec.count, exec, |i| {
        let (img, row) = render_corpus_image(spec, i);
        let path = dir.join(&row.file);
        pnm::write_color(&path, &img).map_err(|source| SynthError::Pnm { path, source })?;
        Ok(row)
    })
    .into_iter()
    .collect::<Result<Vec<_>, SynthError>>()?;
    write_manifest(&dir.join(MANIFEST), &rows)?;
    if spec.glyphs_per_label > 0 {
        let samples = glyph_samples(ALPHABET, spec.glyphs_per_label, spec.seed, exec)?;
        write_glyph_dataset(&dir.join("glyphs"), &samples)?;
    }
    Ok(rows)
}

/// Characters per harvesting plate.
const HARVEST_PLATE_LEN: usize = 8;

/// `per_label` samples of every character in `labels`, grouped by label in
/// the order of `labels`.
///
/// The characters are shuffled onto plates that are rendered like corpus
/// scenes (every brightness regime and plate colour, light noise), located
/// and segmented by the default pipeline, and labeled by position. Training
/// glyphs therefore carry exactly the artifacts the recognizer will see.
pub fn glyph_samples(labels: &str, per_label: usize, seed: u64, exec: Execution) -> Result<Vec<(String, BinaryImage)>, SynthError> {
    let chars: Vec<char> = labels.chars().collect();
    if let Some(&ch) = chars.iter().find(|&&c| font::strokes(c).is_none()) {
        return Err(SynthError::UnknownChar(ch));
    }
    let mut pool: Vec<char> = chars.iter().flat_map(|&c| std::iter::repeat_n(c, per_label)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    pool.shuffle(&mut rng);
    // A short final plate is padded to full length so that it localizes like
    // the others; the padding glyphs are dropped afterwards.
    let mut plates: Vec<String> = pool.chunks(HARVEST_PLATE_LEN).map(|c| c.iter().collect()).collect();
    let keep_last = plates.last().map_or(0, |p| p.chars().count());
    if let Some(last) = plates.last_mut() {
        while last.chars().count() < HARVEST_PLATE_LEN {
            last.push(*chars.choose(&mut rng).expect("labels are not empty"));
        }
    }
    let base = CorpusSpec {
        count: plates.len(),
        seed: seed ^ 0x9e37_79b9_7f4a_7c15,
        noise: 1.0,
        brightness: Brightness::ALL.to_vec(),
        width: 360,
        height: 200,
        ..CorpusSpec::default()
    };
    let recognizer = Recognizer::new(PipelineConfig::default(), None).expect("no model to adjust");
    let seg = SegmentConfig::default();
    let harvested = map_range(plates.len(), exec, |i| {
        let spec = CorpusSpec { text: Some(plates[i].clone()), ..base.clone() };
        let (scene, mut rng) = spec.scene(i);
        let (img, _) = scene.render(&mut rng);
        let expected = plates[i].chars().count();
        let failed = |found| SynthError::GlyphHarvest { plate: plates[i].clone(), expected, found };
        let plate = recognizer.locate(&img, None).ok().and_then(|l| l.plate).ok_or_else(|| failed(0))?;
        let glyphs = segment_chars(&prepare_plate(&plate.crop, &seg), &seg);
        if glyphs.len() != expected {
            return Err(failed(glyphs.len()));
        }
        let keep = if i + 1 == plates.len() { keep_last } else { expected };
        Ok(plates[i].chars().zip(glyphs).take(keep).map(|(c, g)| (c, g.pixels)).collect::<Vec<_>>())
    })
    .into_iter()
    .collect::<Result<Vec<_>, SynthError>>()?;
    let mut samples: Vec<(char, BinaryImage)> = harvested.into_iter().flatten().collect();
    samples.sort_by_key(|(c, _)| chars.iter().position(|x| x == c));
    Ok(samples.into_iter().map(|(c, g)| (c.to_string(), g)).collect())
}

/// Writes `<dir>/<label>/<index>.pgm` for every sample.
pub fn write_glyph_dataset(dir: &Path, samples: &[(String, BinaryImage)]) -> Result<(), SynthError> {
    let mut counters: Vec<(&str, usize)> = Vec::new();
    for (label, glyph) in samples {
        let idx = match counters.iter_mut().find(|(l, _)| l == label) {
            Some(entry) => {
                entry.1 += 1;
                entry.1
            }
            None => {
                counters.push((label, 0));
                0
            }
        };
        let sub = dir.join(label);
        std::fs::create_dir_all(&sub).map_err(io_err(&sub))?;
        let path = sub.join(format!("{idx:04}.pgm"));
        pnm::write_binary(&path, glyph).map_err(|source| SynthError::Pnm { path, source })?;
    }
    Ok(())
}
