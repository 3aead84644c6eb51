//! Character isolation on a levelled plate and normalisation to 60x30 glyphs.

use crate::labeling::{label_components, Connectivity, Region};
use crate::preprocess::adaptive_threshold;
use crate::raster::{BinaryImage, GrayImage, Rect};

pub const GLYPH_HEIGHT: usize = 60;
pub const GLYPH_WIDTH: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentConfig {
    /// Components smaller than this are treated as noise.
    pub noise_area: usize,
    /// Minimum component height as a fraction of the plate height.
    pub min_height_frac: f64,
    /// Accepted component height/width range.
    pub aspect_lo: f64,
    pub aspect_hi: f64,
    /// Glyphs with fewer stroke pixels after resizing are dropped.
    pub min_stroke: usize,
    /// A kept component wider than this multiple of the median width is
    /// reported as a possible merge of neighbouring characters.
    pub wide_factor: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            noise_area: 15,
            min_height_frac: 0.35,
            aspect_lo: 0.8,
            aspect_hi: 6.0,
            min_stroke: 20,
            wide_factor: 1.4,
        }
    }
}

/// A normalised character: 60 rows by 30 columns, stroke pixels set.
#[derive(Debug, Clone, PartialEq)]
pub struct CharGlyph {
    pub pixels: BinaryImage,
    /// Component box in plate coordinates.
    pub source_bbox: Rect,
    pub order_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// One bin per row.
    Horizontal,
    /// One bin per column.
    Vertical,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Projection {
    pub axis: Axis,
    pub counts: Vec<usize>,
}

fn touches_borders(bbox: &Rect, width: usize, height: usize) -> usize {
    [bbox.row0 == 0, bbox.col0 == 0, bbox.row1 + 1 == height, bbox.col1 + 1 == width]
        .iter()
        .filter(|&&t| t)
        .count()
}

/// Binarizes the plate, turns strokes to foreground and removes specks and
/// frame-hugging components.
pub fn prepare_plate(plate: &GrayImage, cfg: &SegmentConfig) -> BinaryImage {
    let strokes = adaptive_threshold(plate).complement();
    let labels = label_components(&strokes, Connectivity::Eight);
    let (w, h) = (plate.width(), plate.height());
    let keep: Vec<bool> = std::iter::once(false)
        .chain(
            labels
                .regions()
                .iter()
                .map(|r| r.area >= cfg.noise_area && touches_borders(&r.bbox, w, h) < 2),
        )
        .collect();
    BinaryImage::from_fn(w, h, |r, c| keep[labels.label_at(r, c) as usize]).expect("same geometry")
}

pub fn projection(bin: &BinaryImage, axis: Axis) -> Projection {
    let counts = match axis {
        Axis::Horizontal => (0..bin.height()).map(|r| (0..bin.width()).filter(|&c| bin.is_set(r, c)).count()).collect(),
        Axis::Vertical => (0..bin.width()).map(|c| (0..bin.height()).filter(|&r| bin.is_set(r, c)).count()).collect(),
    };
    Projection { axis, counts }
}

/// Scales `src` to fit 60x30 keeping its aspect ratio, centred on an
/// empty canvas, by nearest-neighbour sampling.
pub fn letterbox(src: &BinaryImage) -> BinaryImage {
    let (h, w) = (src.height() as f64, src.width() as f64);
    let scale = (GLYPH_HEIGHT as f64 / h).min(GLYPH_WIDTH as f64 / w);
    let nh = ((h * scale).round() as usize).clamp(1, GLYPH_HEIGHT);
    let nw = ((w * scale).round() as usize).clamp(1, GLYPH_WIDTH);
    let (oy, ox) = ((GLYPH_HEIGHT - nh) / 2, (GLYPH_WIDTH - nw) / 2);
    BinaryImage::from_fn(GLYPH_WIDTH, GLYPH_HEIGHT, |r, c| {
        if r < oy || r >= oy + nh || c < ox || c >= ox + nw {
            return false;
        }
        let sr = (((r - oy) as f64 + 0.5) * h / nh as f64).floor() as usize;
        let sc = (((c - ox) as f64 + 0.5) * w / nw as f64).floor() as usize;
        src.is_set(sr.min(src.height() - 1), sc.min(src.width() - 1))
    })
    .expect("fixed glyph size")
}

fn plausible(r: &Region, plate_height: usize, cfg: &SegmentConfig) -> bool {
    let (h, w) = (r.bbox.height() as f64, r.bbox.width() as f64);
    let ratio = h / w;
    h >= cfg.min_height_frac * plate_height as f64 && ratio >= cfg.aspect_lo && ratio <= cfg.aspect_hi
}

/// Extracts character glyphs ordered left to right.
pub fn segment_chars(bin: &BinaryImage, cfg: &SegmentConfig) -> Vec<CharGlyph> {
    let labels = label_components(bin, Connectivity::Eight);
    let mut kept: Vec<&Region> = labels.regions().iter().filter(|r| plausible(r, bin.height(), cfg)).collect();
    kept.sort_by_key(|r| (r.bbox.col0, r.bbox.row0, r.label));
    kept.into_iter()
        .filter_map(|r| {
            let pixels = letterbox(&labels.mask(r.label, r.bbox));
            (pixels.count_ones() >= cfg.min_stroke).then_some((pixels, r.bbox))
        })
        .enumerate()
        .map(|(i, (pixels, source_bbox))| CharGlyph { pixels, source_bbox, order_index: i })
        .collect()
}

/// Order indices of glyphs suspiciously wider than the median glyph.
pub fn wide_glyphs(glyphs: &[CharGlyph], cfg: &SegmentConfig) -> Vec<usize> {
    if glyphs.len() < 2 {
        return Vec::new();
    }
    let mut widths: Vec<usize> = glyphs.iter().map(|g| g.source_bbox.width()).collect();
    widths.sort_unstable();
    let median = widths[widths.len() / 2] as f64;
    glyphs
        .iter()
        .filter(|g| g.source_bbox.width() as f64 > cfg.wide_factor * median)
        .map(|g| g.order_index)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// A light plate with `n` dark bars of the given size, evenly spaced.
    fn bar_plate(n: usize, bar_h: usize, bar_w: usize) -> GrayImage {
        let (w, h) = (n * (bar_w + 8) + 8, bar_h + 16);
        GrayImage::from_fn(w, h, |r, c| {
            let in_bar = (8..8 + bar_h).contains(&r) && c >= 8 && (c - 8) % (bar_w + 8) < bar_w;
            if in_bar {
                0.1
            } else {
                0.9
            }
        })
        .unwrap()
    }

    #[test]
    fn prepare_makes_strokes_foreground_and_drops_specks() {
        let mut px = bar_plate(3, 20, 6).pixels().to_vec();
        let w = 3 * 14 + 8;
        for (r, c) in [(2usize, 10usize), (2, 30), (30, 20)] {
            for (dr, dc) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                px[(r + dr) * w + c + dc] = 0.1;
            }
        }
        let noisy = GrayImage::new(w, 36, px).unwrap();
        let bin = prepare_plate(&noisy, &SegmentConfig::default());
        assert_eq!(bin.count_ones(), 3 * 20 * 6);
        assert!(bin.is_set(10, 9));
        let blank = GrayImage::filled(40, 12, 0.8).unwrap();
        let empty = prepare_plate(&blank, &SegmentConfig::default());
        assert_eq!(empty.count_ones(), 0);
        assert!(segment_chars(&empty, &SegmentConfig::default()).is_empty());
    }

    #[test]
    fn projection_examples() {
        let z = BinaryImage::zeros(3, 2).unwrap();
        assert_eq!(projection(&z, Axis::Horizontal).counts, vec![0, 0]);
        let col = BinaryImage::from_rows(&[".#.", ".#.", ".#."]).unwrap();
        assert_eq!(projection(&col, Axis::Vertical).counts, vec![0, 3, 0]);
        let diag = BinaryImage::from_rows(&["#.", ".#"]).unwrap();
        assert_eq!(projection(&diag, Axis::Vertical).counts, vec![1, 1]);
        assert_eq!(projection(&diag, Axis::Horizontal).counts, vec![1, 1]);
    }

    #[test]
    fn segments_left_to_right_and_skips_small_blobs() {
        let plate = bar_plate(8, 24, 6);
        let mut bin = prepare_plate(&plate, &SegmentConfig::default());
        // A short blob (bolt hole) between bars.
        for r in 12..16 {
            for c in 16..19 {
                bin.set(r, c, true);
            }
        }
        let glyphs = segment_chars(&bin, &SegmentConfig::default());
        assert_eq!(glyphs.len(), 8);
        for (i, g) in glyphs.iter().enumerate() {
            assert_eq!(g.order_index, i);
            assert_eq!((g.pixels.width(), g.pixels.height()), (GLYPH_WIDTH, GLYPH_HEIGHT));
            assert!(g.pixels.count_ones() >= 20);
        }
        assert!(glyphs.windows(2).all(|p| p[0].source_bbox.col0 < p[1].source_bbox.col0));
        assert!(wide_glyphs(&glyphs, &SegmentConfig::default()).is_empty());
    }

    #[test]
    fn letterbox_centres_and_keeps_aspect() {
        let bar = BinaryImage::from_fn(4, 20, |_, _| true).unwrap();
        let g = letterbox(&bar);
        // Scale 3: a 60x12 block centred horizontally.
        assert_eq!(g.bounding_box(), Some(Rect::new(0, 9, 59, 20)));
        assert_eq!(g.count_ones(), 60 * 12);
    }

    proptest! {
        #[test]
        fn resegmenting_a_glyph_is_identity(h in 12usize..40, w in 4usize..20, seed in any::<u64>()) {
            prop_assume!((0.8..=6.0).contains(&(h as f64 / w as f64)));
            // A connected random comb: full left column and top row, plus
            // arms of random length on even rows.
            let arm = |r: usize| (seed.rotate_left(r as u32 * 5) % w as u64) as usize;
            let shape = BinaryImage::from_fn(w, h, |r, c| c == 0 || r == 0 || (r % 2 == 0 && c <= arm(r))).unwrap();
            let cfg = SegmentConfig { min_stroke: 1, ..Default::default() };
            let first = segment_chars(&shape, &cfg);
            prop_assert_eq!(first.len(), 1);
            let again = segment_chars(&first[0].pixels, &cfg);
            prop_assert_eq!(again.len(), 1);
            prop_assert_eq!(&again[0].pixels, &first[0].pixels);
        }

        #[test]
        fn projections_sum_to_foreground(
            (w, h, px) in (1usize..12, 1usize..12).prop_flat_map(|(w, h)| (Just(w), Just(h), prop::collection::vec(0u8..=1, w * h))),
        ) {
            let img = BinaryImage::new(w, h, px).unwrap();
            for axis in [Axis::Horizontal, Axis::Vertical] {
                prop_assert_eq!(projection(&img, axis).counts.iter().sum::<usize>(), img.count_ones());
            }
        }

        #[test]
        fn letterbox_support_scales(h in 6usize..60, w in 3usize..30) {
            let block = BinaryImage::from_fn(w, h, |_, _| true).unwrap();
            let g = letterbox(&block);
            let scale = (60.0 / h as f64).min(30.0 / w as f64);
            let support = projection(&g, Axis::Vertical).counts.iter().filter(|&&c| c > 0).count() as f64;
            prop_assert!((support - w as f64 * scale).abs() <= 1.0);
        }

        #[test]
        fn glyph_count_bounded_by_components(
            (w, h, px) in (4usize..30, 4usize..30).prop_flat_map(|(w, h)| (Just(w), Just(h), prop::collection::vec(0u8..=1, w * h))),
        ) {
            let img = BinaryImage::new(w, h, px).unwrap();
            let cfg = SegmentConfig { min_stroke: 1, ..Default::default() };
            let n = label_components(&img, Connectivity::Eight).count();
            let glyphs = segment_chars(&img, &cfg);
            prop_assert!(glyphs.len() <= n);
            for (i, g) in glyphs.iter().enumerate() {
                prop_assert_eq!(g.order_index, i);
            }
        }
    }
}
