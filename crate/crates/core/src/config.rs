//! Pipeline configuration and its plain-text `key = value` format.
//!
//! Lines are `key = value`; blank lines and `#` comments are ignored.
//! Unknown keys and out-of-range values are rejected. [`KEYS`] lists every
//! key with a short description.

use crate::color::ColorConfig;
use crate::edges::{Direction, EdgeCut, EdgeOperator};
use crate::locate::{JumpMode, LocatorConfig};
use crate::morphology::StructuringElement;
use crate::segment::SegmentConfig;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),
    #[error("{key}: invalid value {value:?}: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: {source}")]
    AtLine { line: usize, source: Box<ConfigError> },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMode {
    Adaptive,
    Fixed(f64),
}

impl ThresholdMode {
    pub fn label(&self) -> String {
        match self {
            ThresholdMode::Adaptive => "adaptive".into(),
            ThresholdMode::Fixed(t) => format!("fixed:{t}"),
        }
    }
}

/// Which binary image the row jumps are counted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JumpSource {
    /// The thresholded image.
    #[default]
    Binary,
    /// The binarized edge map.
    Edges,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub gaussian_sigma: f64,
    pub gaussian_radius: usize,
    pub threshold: ThresholdMode,
    pub edge_operator: EdgeOperator,
    pub edge_direction: Direction,
    pub edge_cut: EdgeCut,
    pub erode_se: StructuringElement,
    pub dilate_se: StructuringElement,
    pub jump_source: JumpSource,
    pub locator: LocatorConfig,
    pub segment: SegmentConfig,
    /// Neighbour count; 0 keeps the value stored in the model file.
    pub k: usize,
    pub normalize: bool,
    pub color: ColorConfig,
    /// Worker threads; 0 uses every available CPU, 1 runs sequentially.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            gaussian_sigma: 1.0,
            gaussian_radius: 2,
            threshold: ThresholdMode::Adaptive,
            edge_operator: EdgeOperator::Sobel,
            edge_direction: Direction::Both,
            edge_cut: EdgeCut::default(),
            erode_se: StructuringElement::rect(3, 1).expect("valid"),
            dilate_se: StructuringElement::rect(5, 31).expect("valid"),
            jump_source: JumpSource::Binary,
            locator: LocatorConfig::default(),
            segment: SegmentConfig::default(),
            k: 0,
            normalize: false,
            color: ColorConfig::default(),
            workers: 0,
        }
    }
}

/// Every accepted key and what it controls.
pub const KEYS: &[(&str, &str)] = &[
    ("gaussian.sigma", "smoothing standard deviation in pixels (> 0)"),
    ("gaussian.radius", "smoothing kernel radius in pixels (>= 1)"),
    ("threshold.mode", "`adaptive` (mean + variance) or `fixed:<t>` with t in [0, 1]"),
    ("edge.operator", "sobel | prewitt | roberts | log"),
    ("edge.direction", "both | vertical | horizontal"),
    ("edge.cut", "`relative:<f>` of the unit-step response, `stat` (mean + 2 sd), or `abs:<t>`"),
    ("morph.erode", "erosion element HEIGHTxWIDTH, odd sizes"),
    ("morph.dilate", "dilation element HEIGHTxWIDTH, odd sizes"),
    ("locator.jump_source", "binary | edges"),
    ("locator.jump_mode", "horizontal | diagonal"),
    ("locator.min_run", "run must be strictly longer than this many rows"),
    ("locator.min_jumps", "rows in the run need strictly more jumps than this"),
    ("locator.aspect_lo", "minimum plate width/height"),
    ("locator.aspect_hi", "maximum plate width/height"),
    ("locator.min_density", "minimum region fill density in [0, 1]"),
    ("locator.min_region_area", "regions smaller than this are ignored"),
    ("locator.rectify_degrees", "tilt above which candidates are measured levelled"),
    ("locator.plate_margin", "pixels added around the candidate when cutting the plate"),
    ("segment.noise_area", "components smaller than this are noise"),
    ("segment.min_height_frac", "minimum character height / plate height"),
    ("segment.aspect_lo", "minimum character height/width"),
    ("segment.aspect_hi", "maximum character height/width"),
    ("segment.min_stroke", "minimum stroke pixels in a 60x30 glyph"),
    ("segment.wide_factor", "width over median width that flags a merged character"),
    ("knn.k", "neighbour count; 0 keeps the model's k"),
    ("knn.normalize", "min-max scale features before matching (true | false)"),
    ("color.red.h_min", "red band lower hue"),
    ("color.red.h_max", "red band upper hue"),
    ("color.red.s_min", "red band minimum saturation"),
    ("color.red.v_min", "red band minimum value"),
    ("color.yellow.h_min", "yellow band lower hue"),
    ("color.yellow.h_max", "yellow band upper hue"),
    ("color.yellow.s_min", "yellow band minimum saturation"),
    ("color.yellow.v_min", "yellow band minimum value"),
    ("color.white.s_max", "white maximum saturation"),
    ("color.white.v_min", "white minimum value"),
    ("workers", "worker threads; 0 = all CPUs, 1 = sequential"),
];

fn invalid(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue { key: key.into(), value: value.into(), reason: reason.into() }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| invalid(key, value, "not a number"))
}

fn unit(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = num(key, value)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(invalid(key, value, "must lie in [0, 1]"));
    }
    Ok(v)
}

fn positive(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = num(key, value)?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(invalid(key, value, "must be a positive number"));
    }
    Ok(v)
}

fn non_negative(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = num(key, value)?;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(invalid(key, value, "must be a non-negative number"));
    }
    Ok(v)
}

impl PipelineConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        let v = value;
        match key {
            "gaussian.sigma" => self.gaussian_sigma = positive(key, v)?,
            "gaussian.radius" => {
                let r: usize = num(key, v)?;
                if r == 0 {
                    return Err(invalid(key, v, "must be at least 1"));
                }
                self.gaussian_radius = r;
            }
            "threshold.mode" => {
                self.threshold = if v == "adaptive" {
                    ThresholdMode::Adaptive
                } else if let Some(t) = v.strip_prefix("fixed:") {
                    ThresholdMode::Fixed(unit(key, t)?)
                } else {
                    return Err(invalid(key, v, "expected `adaptive` or `fixed:<t>`"));
                }
            }
            "edge.operator" => {
                self.edge_operator = EdgeOperator::parse(v).ok_or_else(|| invalid(key, v, "unknown operator"))?
            }
            "edge.direction" => {
                self.edge_direction = match v {
                    "both" => Direction::Both,
                    "vertical" => Direction::Vertical,
                    "horizontal" => Direction::Horizontal,
                    _ => return Err(invalid(key, v, "expected both, vertical or horizontal")),
                }
            }
            "edge.cut" => {
                self.edge_cut = if v == "stat" {
                    EdgeCut::Statistical
                } else if let Some(f) = v.strip_prefix("relative:") {
                    EdgeCut::Relative(non_negative(key, f)?)
                } else if let Some(t) = v.strip_prefix("abs:") {
                    EdgeCut::Absolute(non_negative(key, t)?)
                } else {
                    return Err(invalid(key, v, "expected relative:<f>, stat or abs:<t>"));
                }
            }
            "morph.erode" => self.erode_se = v.parse().map_err(|e: crate::morphology::SeError| invalid(key, v, e.to_string()))?,
            "morph.dilate" => self.dilate_se = v.parse().map_err(|e: crate::morphology::SeError| invalid(key, v, e.to_string()))?,
            "locator.jump_source" => {
                self.jump_source = match v {
                    "binary" => JumpSource::Binary,
                    "edges" => JumpSource::Edges,
                    _ => return Err(invalid(key, v, "expected binary or edges")),
                }
            }
            "locator.jump_mode" => {
                self.locator.jump_mode = match v {
                    "horizontal" => JumpMode::Horizontal,
                    "diagonal" => JumpMode::Diagonal,
                    _ => return Err(invalid(key, v, "expected horizontal or diagonal")),
                }
            }
            "locator.min_run" => self.locator.min_run = num(key, v)?,
            "locator.min_jumps" => self.locator.min_jumps = num(key, v)?,
            "locator.aspect_lo" => self.locator.aspect_lo = non_negative(key, v)?,
            "locator.aspect_hi" => self.locator.aspect_hi = positive(key, v)?,
            "locator.min_density" => self.locator.min_density = unit(key, v)?,
            "locator.min_region_area" => self.locator.min_region_area = num(key, v)?,
            "locator.rectify_degrees" => self.locator.rectify_degrees = non_negative(key, v)?,
            "locator.plate_margin" => self.locator.plate_margin = num(key, v)?,
            "segment.noise_area" => self.segment.noise_area = num(key, v)?,
            "segment.min_height_frac" => self.segment.min_height_frac = unit(key, v)?,
            "segment.aspect_lo" => self.segment.aspect_lo = non_negative(key, v)?,
            "segment.aspect_hi" => self.segment.aspect_hi = positive(key, v)?,
            "segment.min_stroke" => self.segment.min_stroke = num(key, v)?,
            "segment.wide_factor" => self.segment.wide_factor = positive(key, v)?,
            "knn.k" => self.k = num(key, v)?,
            "knn.normalize" => {
                self.normalize = match v {
                    "true" => true,
                    "false" => false,
                    _ => return Err(invalid(key, v, "expected true or false")),
                }
            }
            "color.red.h_min" => self.color.red.h_min = unit(key, v)?,
            "color.red.h_max" => self.color.red.h_max = unit(key, v)?,
            "color.red.s_min" => self.color.red.s_min = unit(key, v)?,
            "color.red.v_min" => self.color.red.v_min = unit(key, v)?,
            "color.yellow.h_min" => self.color.yellow.h_min = unit(key, v)?,
            "color.yellow.h_max" => self.color.yellow.h_max = unit(key, v)?,
            "color.yellow.s_min" => self.color.yellow.s_min = unit(key, v)?,
            "color.yellow.v_min" => self.color.yellow.v_min = unit(key, v)?,
            "color.white.s_max" => self.color.white_s_max = unit(key, v)?,
            "color.white.v_min" => self.color.white_v_min = unit(key, v)?,
            "workers" => self.workers = num(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        self.check_pairs(key, value)
    }

    fn check_pairs(&self, key: &str, value: &str) -> Result<(), ConfigError> {
        if self.locator.aspect_lo > self.locator.aspect_hi {
            return Err(invalid(key, value, "locator.aspect_lo exceeds locator.aspect_hi"));
        }
        if self.segment.aspect_lo > self.segment.aspect_hi {
            return Err(invalid(key, value, "segment.aspect_lo exceeds segment.aspect_hi"));
        }
        Ok(())
    }

    /// Applies a `key = value` document on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
            self.set(k.trim(), v.trim())
                .map_err(|e| ConfigError::AtLine { line: i + 1, source: Box::new(e) })?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        let mut cfg = PipelineConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Applies a `key=value` override as given on a command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: 0, text: assignment.to_string() })?;
        self.set(k.trim(), v.trim())
    }

    /// Every key with its current value, in [`KEYS`] order.
    pub fn to_text(&self) -> String {
        let cut = match self.edge_cut {
            EdgeCut::Relative(f) => format!("relative:{f}"),
            EdgeCut::Statistical => "stat".into(),
            EdgeCut::Absolute(t) => format!("abs:{t}"),
        };
        let dir = match self.edge_direction {
            Direction::Both => "both",
            Direction::Vertical => "vertical",
            Direction::Horizontal => "horizontal",
        };
        let l = &self.locator;
        let s = &self.segment;
        let c = &self.color;
        let values: Vec<String> = vec![
            self.gaussian_sigma.to_string(),
            self.gaussian_radius.to_string(),
            self.threshold.label(),
            self.edge_operator.name().into(),
            dir.into(),
            cut,
            self.erode_se.to_string(),
            self.dilate_se.to_string(),
            match self.jump_source {
                JumpSource::Binary => "binary".into(),
                JumpSource::Edges => "edges".into(),
            },
            match l.jump_mode {
                JumpMode::Horizontal => "horizontal".into(),
                JumpMode::Diagonal => "diagonal".into(),
            },
            l.min_run.to_string(),
            l.min_jumps.to_string(),
            l.aspect_lo.to_string(),
            l.aspect_hi.to_string(),
            l.min_density.to_string(),
            l.min_region_area.to_string(),
            l.rectify_degrees.to_string(),
            l.plate_margin.to_string(),
            s.noise_area.to_string(),
            s.min_height_frac.to_string(),
            s.aspect_lo.to_string(),
            s.aspect_hi.to_string(),
            s.min_stroke.to_string(),
            s.wide_factor.to_string(),
            self.k.to_string(),
            self.normalize.to_string(),
            c.red.h_min.to_string(),
            c.red.h_max.to_string(),
            c.red.s_min.to_string(),
            c.red.v_min.to_string(),
            c.yellow.h_min.to_string(),
            c.yellow.h_max.to_string(),
            c.yellow.s_min.to_string(),
            c.yellow.v_min.to_string(),
            c.white_s_max.to_string(),
            c.white_v_min.to_string(),
            self.workers.to_string(),
        ];
        let mut out = String::new();
        for ((key, _), value) in KEYS.iter().zip(values) {
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_covers_every_key() {
        let mut cfg = PipelineConfig::default();
        cfg.set("threshold.mode", "fixed:0.4").unwrap();
        cfg.set("edge.cut", "stat").unwrap();
        cfg.set("morph.dilate", "3x21").unwrap();
        cfg.set("color.red.h_min", "0.75").unwrap();
        let text = cfg.to_text();
        assert_eq!(text.lines().count(), KEYS.len());
        let mut back = PipelineConfig::default();
        back.apply_text(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_input() {
        let mut cfg = PipelineConfig::default();
        assert_eq!(cfg.set("gaussian.sigmaa", "1"), Err(ConfigError::UnknownKey("gaussian.sigmaa".into())));
        assert!(cfg.set("gaussian.sigma", "0").is_err());
        assert!(cfg.set("gaussian.radius", "0").is_err());
        assert!(cfg.set("threshold.mode", "fixed:1.5").is_err());
        assert!(cfg.set("morph.erode", "2x3").is_err());
        assert!(cfg.set("locator.aspect_lo", "9").is_err());
        assert!(cfg.set("knn.normalize", "yes").is_err());
        let err = cfg.apply_text("# comment\n\nedge.operator = canny\n").unwrap_err();
        assert!(err.to_string().starts_with("line 3:"), "{err}");
        assert!(matches!(cfg.apply_text("nonsense"), Err(ConfigError::Syntax { line: 1, .. })));
    }

    #[test]
    fn comments_and_overrides() {
        let mut cfg = PipelineConfig::default();
        cfg.apply_text("knn.k = 3  # neighbours\nworkers=1\n").unwrap();
        assert_eq!((cfg.k, cfg.workers), (3, 1));
        cfg.apply_override("locator.min_run=10").unwrap();
        assert_eq!(cfg.locator.min_run, 10);
        assert!(cfg.apply_override("locator.min_run").is_err());
    }
}
