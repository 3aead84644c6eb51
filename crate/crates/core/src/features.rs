//! Frame-based glyph features.
//!
//! A 60x30 skeleton is tiled into 18 frames of 10x10 (6 rows by 3 columns,
//! numbered row-major from 1). For each frame the mean Euclidean distance
//! and the mean elevation angle (radians) of its set pixels are measured
//! from the frame's bottom-left cell, local `(9, 0)`. Empty frames give 0.

use crate::raster::BinaryImage;
use crate::segment::{GLYPH_HEIGHT, GLYPH_WIDTH};
use crate::thinning::{thin, Skeleton};
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

pub const FRAME: usize = 10;
pub const FRAME_ROWS: usize = 6;
pub const FRAME_COLS: usize = 3;
pub const NUM_FRAMES: usize = FRAME_ROWS * FRAME_COLS;
pub const DIM: usize = 2 * NUM_FRAMES;
/// Distance from the reference cell to the opposite corner, `sqrt(162)`.
pub const MAX_DISTANCE: f64 = 12.727_922_061_357_855;
pub const MAX_ANGLE: f64 = FRAC_PI_2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("glyph must be {GLYPH_HEIGHT}x{GLYPH_WIDTH} (rows x cols), got {rows}x{cols}")]
    GlyphSize { rows: usize, cols: usize },
}

/// 18 distance means followed by 18 angle means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; DIM]);

impl FeatureVector {
    pub fn distances(&self) -> &[f64] {
        &self.0[..NUM_FRAMES]
    }

    pub fn angles(&self) -> &[f64] {
        &self.0[NUM_FRAMES..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Whether every component lies in its documented range.
    pub fn in_range(&self) -> bool {
        const TOL: f64 = 1e-9;
        self.distances().iter().all(|&d| (0.0..=MAX_DISTANCE + TOL).contains(&d))
            && self.angles().iter().all(|&a| (0.0..=MAX_ANGLE + TOL).contains(&a))
    }
}

/// One 10x10 tile; `index` runs 1..=18 as `3 * frow + fcol + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub index: usize,
    pub origin: (usize, usize),
    /// Set pixels in frame-local `(row, col)`.
    pub pixels: Vec<(usize, usize)>,
}

pub fn check_glyph(img: &BinaryImage) -> Result<(), FeatureError> {
    if img.height() != GLYPH_HEIGHT || img.width() != GLYPH_WIDTH {
        return Err(FeatureError::GlyphSize { rows: img.height(), cols: img.width() });
    }
    Ok(())
}

pub fn frames_of(sk: &Skeleton) -> Vec<Frame> {
    let img = &sk.pixels;
    (0..FRAME_ROWS)
        .flat_map(|frow| (0..FRAME_COLS).map(move |fcol| (frow, fcol)))
        .map(|(frow, fcol)| {
            let origin = (frow * FRAME, fcol * FRAME);
            let mut pixels = Vec::new();
            for r in 0..FRAME {
                for c in 0..FRAME {
                    if img.is_set(origin.0 + r, origin.1 + c) {
                        pixels.push((r, c));
                    }
                }
            }
            Frame { index: FRAME_COLS * frow + fcol + 1, origin, pixels }
        })
        .collect()
}

fn frame_mean(frame: &Frame, f: impl Fn(f64, f64) -> f64) -> f64 {
    if frame.pixels.is_empty() {
        return 0.0;
    }
    let sum: f64 = frame
        .pixels
        .iter()
        .map(|&(r, c)| f((FRAME - 1 - r) as f64, c as f64))
        .sum();
    sum / frame.pixels.len() as f64
}

pub fn distance_features(frames: &[Frame]) -> Vec<f64> {
    frames.iter().map(|fr| frame_mean(fr, |up, right| (up * up + right * right).sqrt())).collect()
}

pub fn angle_features(frames: &[Frame]) -> Vec<f64> {
    frames.iter().map(|fr| frame_mean(fr, |up, right| up.atan2(right))).collect()
}

pub fn features_of_skeleton(sk: &Skeleton) -> FeatureVector {
    let frames = frames_of(sk);
    let mut v = [0.0; DIM];
    v[..NUM_FRAMES].copy_from_slice(&distance_features(&frames));
    v[NUM_FRAMES..].copy_from_slice(&angle_features(&frames));
    FeatureVector(v)
}

/// Thins the glyph and measures its frames.
pub fn extract_features(glyph: &BinaryImage) -> Result<FeatureVector, FeatureError> {
    check_glyph(glyph)?;
    Ok(features_of_skeleton(&thin(glyph)))
}
