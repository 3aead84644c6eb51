//! Plate background type from HSV pixel tallies.

use crate::hsv::{rgb_to_hsv, HsvPixel};
use crate::raster::ColorImage;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlateKind {
    Red,
    Yellow,
    White,
    Unknown,
}

impl PlateKind {
    pub const TALLIED: [PlateKind; 3] = [PlateKind::Red, PlateKind::Yellow, PlateKind::White];

    pub fn name(&self) -> &'static str {
        match self {
            PlateKind::Red => "red",
            PlateKind::Yellow => "yellow",
            PlateKind::White => "white",
            PlateKind::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<PlateKind> {
        [PlateKind::Red, PlateKind::Yellow, PlateKind::White, PlateKind::Unknown]
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for PlateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A saturated band: `s >= s_min`, `v >= v_min`, `h_min <= h <= h_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HueBand {
    pub h_min: f64,
    pub h_max: f64,
    pub s_min: f64,
    pub v_min: f64,
}

impl HueBand {
    pub fn matches(&self, p: &HsvPixel) -> bool {
        p.s >= self.s_min && p.v >= self.v_min && p.h >= self.h_min && p.h <= self.h_max
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorConfig {
    pub red: HueBand,
    pub yellow: HueBand,
    /// White needs `s <= white_s_max` and `v >= white_v_min`.
    pub white_s_max: f64,
    pub white_v_min: f64,
}

impl Default for ColorConfig {
    fn default() -> Self {
        ColorConfig {
            red: HueBand { h_min: 0.8, h_max: 0.94, s_min: 0.45, v_min: 0.5 },
            yellow: HueBand { h_min: 0.58, h_max: 0.74, s_min: 0.45, v_min: 0.5 },
            white_s_max: 0.15,
            white_v_min: 0.8,
        }
    }
}

impl ColorConfig {
    /// First matching rule in the order red, yellow, white.
    pub fn rule_for(&self, p: &HsvPixel) -> Option<PlateKind> {
        if self.red.matches(p) {
            Some(PlateKind::Red)
        } else if self.yellow.matches(p) {
            Some(PlateKind::Yellow)
        } else if p.s <= self.white_s_max && p.v >= self.white_v_min {
            Some(PlateKind::White)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlateType {
    pub kind: PlateKind,
    /// Tallies for red, yellow and white.
    pub counts: [usize; 3],
}

impl PlateType {
    pub fn from_counts(counts: [usize; 3]) -> Self {
        let best = counts.iter().copied().max().unwrap_or(0);
        let leaders: Vec<usize> = (0..3).filter(|&i| counts[i] == best).collect();
        let kind = if best == 0 || leaders.len() > 1 { PlateKind::Unknown } else { PlateKind::TALLIED[leaders[0]] };
        PlateType { kind, counts }
    }
}

pub fn classify_pixels<'a>(pixels: impl IntoIterator<Item = &'a [u8; 3]>, cfg: &ColorConfig) -> PlateType {
    let mut counts = [0usize; 3];
    for &p in pixels {
        match cfg.rule_for(&rgb_to_hsv(p)) {
            Some(PlateKind::Red) => counts[0] += 1,
            Some(PlateKind::Yellow) => counts[1] += 1,
            Some(PlateKind::White) => counts[2] += 1,
            _ => {}
        }
    }
    PlateType::from_counts(counts)
}

pub fn classify_plate_color(plate: &ColorImage, cfg: &ColorConfig) -> PlateType {
    classify_pixels(plate.pixels(), cfg)
}
