//! Plate search over the morphology output: row jump profiles, geometric
//! and density gates, best-candidate selection, moment-based tilt and
//! deskewing of the accepted plate.

use crate::exec::{map_ordered, Execution};
use crate::labeling::{label_components, Connectivity, LabeledRegions, Region};
use crate::morphology::fill_holes;
use crate::raster::{BinaryImage, GrayImage, Rect};
use crate::rotate::{rotate_binary, rotate_gray, RotationFrame};
use std::cmp::Ordering;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LocateError {
    #[error("box {bbox:?} does not fit a {width}x{height} image")]
    OutOfBounds { bbox: Rect, width: usize, height: usize },
    #[error("deskew angle {0} is outside [-45, 45] degrees")]
    AngleOutOfRange(f64),
    #[error("no plate-shaped foreground inside the candidate box")]
    EmptyPlate,
}

/// How color jumps are counted along a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JumpMode {
    /// `pixel(i, j) xor pixel(i, j + 1)`.
    #[default]
    Horizontal,
    /// `pixel(i, j) xor pixel(i + 1, j + 1)`, the literal diagonal reading.
    Diagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocatorConfig {
    /// A run must be strictly longer than this many rows.
    pub min_run: usize,
    /// Each row in the run needs strictly more jumps than this.
    pub min_jumps: u32,
    pub aspect_lo: f64,
    pub aspect_hi: f64,
    pub min_density: f64,
    pub jump_mode: JumpMode,
    /// Regions smaller than this are not scored at all.
    pub min_region_area: usize,
    /// Candidates tilted by more than this are measured in a rotated frame.
    pub rectify_degrees: f64,
    /// Extra pixels around the candidate box when cutting out the plate.
    pub plate_margin: usize,
}

impl Default for LocatorConfig {
    fn default() -> Self {
        LocatorConfig {
            min_run: 12,
            min_jumps: 15,
            aspect_lo: 2.0,
            aspect_hi: 6.0,
            min_density: 0.5,
            jump_mode: JumpMode::Horizontal,
            min_region_area: 100,
            rectify_degrees: 0.5,
            plate_margin: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    JumpRun,
    AspectRatio,
    Density,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::JumpRun => "jump-run",
            RejectReason::AspectRatio => "aspect-ratio",
            RejectReason::Density => "density",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject(RejectReason),
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept)
    }
}

/// A labeled region measured for plate-likeness.
///
/// For an upright region the measurement frame is its bounding box. A
/// region tilted beyond `rectify_degrees` is first rotated level and
/// measured in the box of the rotated mask, so `frame_width`,
/// `frame_height`, the jump profile, aspect ratio and density describe the
/// levelled shape while `bbox` stays in source coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateCandidate {
    pub label: u32,
    pub bbox: Rect,
    pub area: usize,
    pub frame_width: usize,
    pub frame_height: usize,
    pub jump_profile: Vec<u32>,
    pub aspect_ratio: f64,
    pub fill_density: f64,
    pub tilt_degrees: f64,
}

pub fn jump_profile(bin: &BinaryImage, bbox: Rect, mode: JumpMode) -> Result<Vec<u32>, LocateError> {
    if !bbox.fits_in(bin.width(), bin.height()) {
        return Err(LocateError::OutOfBounds { bbox, width: bin.width(), height: bin.height() });
    }
    let profile = (bbox.row0..=bbox.row1)
        .map(|r| {
            (bbox.col0..bbox.col1)
                .filter(|&c| match mode {
                    JumpMode::Horizontal => bin.get(r, c) != bin.get(r, c + 1),
                    JumpMode::Diagonal => r < bbox.row1 && bin.get(r, c) != bin.get(r + 1, c + 1),
                })
                .count() as u32
        })
        .collect();
    Ok(profile)
}

/// Length of the longest run of consecutive rows with more than `min_jumps`.
pub fn longest_jump_run(profile: &[u32], min_jumps: u32) -> usize {
    let mut best = 0;
    let mut run = 0;
    for &v in profile {
        run = if v > min_jumps { run + 1 } else { 0 };
        best = best.max(run);
    }
    best
}

pub fn validate_candidate(c: &PlateCandidate, cfg: &LocatorConfig) -> Verdict {
    if longest_jump_run(&c.jump_profile, cfg.min_jumps) <= cfg.min_run {
        Verdict::Reject(RejectReason::JumpRun)
    } else if !(cfg.aspect_lo..=cfg.aspect_hi).contains(&c.aspect_ratio) {
        Verdict::Reject(RejectReason::AspectRatio)
    } else if c.fill_density < cfg.min_density {
        Verdict::Reject(RejectReason::Density)
    } else {
        Verdict::Accept
    }
}

/// Integer central moments `(n, m11, m20, m02)` scaled by `n^2`, with
/// x = column and y = row.
fn scaled_moments(mask: &BinaryImage) -> (i128, i128, i128, i128) {
    let (mut n, mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0i128, 0i128, 0i128, 0i128, 0i128, 0i128);
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            if mask.is_set(r, c) {
                let (x, y) = (c as i128, r as i128);
                n += 1;
                sx += x;
                sy += y;
                sxx += x * x;
                syy += y * y;
                sxy += x * y;
            }
        }
    }
    (n, n * sxy - sx * sy, n * sxx - sx * sx, n * syy - sy * sy)
}

/// Principal-axis tilt in degrees, folded into `[-45, 45]`. Positive means
/// the shape is turned counter-clockwise (its right end is higher).
pub fn estimate_tilt(mask: &BinaryImage) -> f64 {
    let (n, m11, m20, m02) = scaled_moments(mask);
    if n < 3 || (m11 == 0 && m20 == m02) {
        return 0.0;
    }
    let theta = 0.5 * (2.0 * m11 as f64).atan2((m20 - m02) as f64);
    let mut deg = theta.to_degrees();
    deg -= 90.0 * (deg / 90.0).round();
    // Rows grow downwards, so a counter-clockwise turn has negative slope.
    let tilt = -deg;
    if tilt == 0.0 {
        0.0
    } else {
        tilt
    }
}

/// Rotates by `-degrees` so a plate tilted by `degrees` ends up level.
/// The canvas grows to hold the rotated content; uncovered cells take the
/// image median.
pub fn deskew(plate: &GrayImage, degrees: f64) -> Result<GrayImage, LocateError> {
    if degrees.is_nan() || degrees.abs() > 45.0 {
        return Err(LocateError::AngleOutOfRange(degrees));
    }
    if degrees == 0.0 {
        return Ok(plate.clone());
    }
    Ok(rotate_gray(plate, -degrees, plate.median()))
}

pub fn build_candidate(region: &Region, regions: &LabeledRegions, bin: &BinaryImage, cfg: &LocatorConfig) -> PlateCandidate {
    let bbox = region.bbox;
    let mask = regions.mask(region.label, bbox);
    let tilt = estimate_tilt(&mask);
    let (frame, profile_src, ones) = if tilt.abs() <= cfg.rectify_degrees {
        (bbox, None, region.area)
    } else {
        let rmask = rotate_binary(&mask, -tilt);
        let rbin = rotate_binary(&bin.crop(bbox), -tilt);
        match rmask.bounding_box() {
            Some(frame) => (frame, Some(rbin), rmask.count_ones()),
            None => (bbox, None, region.area),
        }
    };
    let jump_profile = match &profile_src {
        Some(rbin) => jump_profile(rbin, frame, cfg.jump_mode),
        None => jump_profile(bin, frame, cfg.jump_mode),
    }
    .expect("frame lies inside its own image");
    PlateCandidate {
        label: region.label,
        bbox,
        area: region.area,
        frame_width: frame.width(),
        frame_height: frame.height(),
        jump_profile,
        aspect_ratio: frame.width() as f64 / frame.height() as f64,
        fill_density: ones as f64 / frame.area() as f64,
        tilt_degrees: tilt,
    }
}

/// Scores every region of at least `min_region_area` pixels.
pub fn score_candidates(
    regions: &LabeledRegions,
    bin: &BinaryImage,
    cfg: &LocatorConfig,
    exec: Execution,
) -> Vec<(PlateCandidate, Verdict)> {
    let big: Vec<&Region> = regions.regions().iter().filter(|r| r.area >= cfg.min_region_area).collect();
    map_ordered(&big, exec, |r| {
        let c = build_candidate(r, regions, bin, cfg);
        let v = validate_candidate(&c, cfg);
        (c, v)
    })
}

/// Total order used to pick the plate: widest frame, then larger area, then
/// topmost box, then lowest label.
pub fn candidate_order(a: &PlateCandidate, b: &PlateCandidate) -> Ordering {
    b.frame_width
        .cmp(&a.frame_width)
        .then(b.area.cmp(&a.area))
        .then(a.bbox.row0.cmp(&b.bbox.row0))
        .then(a.label.cmp(&b.label))
}

pub fn select_plate(
    regions: &LabeledRegions,
    bin: &BinaryImage,
    cfg: &LocatorConfig,
    exec: Execution,
) -> Option<PlateCandidate> {
    best_accepted(score_candidates(regions, bin, cfg, exec))
}

pub fn best_accepted(scored: Vec<(PlateCandidate, Verdict)>) -> Option<PlateCandidate> {
    scored
        .into_iter()
        .filter(|(_, v)| v.is_accept())
        .map(|(c, _)| c)
        .min_by(candidate_order)
}

/// The accepted plate, levelled.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateRegion {
    pub crop: GrayImage,
    /// Plate corners `(row, col)` in source coordinates, clockwise from
    /// the top-left of the levelled plate.
    pub corners: [(f64, f64); 4],
    pub tilt_degrees: f64,
    /// Box of the plate mask in source coordinates.
    pub bbox: Rect,
    /// Plate mask over `bbox`, in source orientation.
    pub mask: BinaryImage,
}

/// Cuts the plate out of `gray` around `candidate`.
///
/// The plate body is the largest connected foreground region of the
/// hole-filled binary image near the candidate; its tilt is measured from
/// moments, pixels outside it are neutralised to the plate median, and the
/// result is deskewed and trimmed to the levelled mask.
pub fn extract_plate(
    gray: &GrayImage,
    bin: &BinaryImage,
    candidate: &PlateCandidate,
    cfg: &LocatorConfig,
) -> Result<PlateRegion, LocateError> {
    let rect = candidate.bbox.expand(cfg.plate_margin, gray.width(), gray.height());
    let filled = fill_holes(&bin.crop(rect));
    let labels = label_components(&filled, Connectivity::Eight);
    let body = labels
        .regions()
        .iter()
        .max_by(|a, b| a.area.cmp(&b.area).then(b.label.cmp(&a.label)))
        .ok_or(LocateError::EmptyPlate)?;
    let full = Rect::new(0, 0, rect.height() - 1, rect.width() - 1);
    let mask = labels.mask(body.label, full);
    let tilt = estimate_tilt(&mask);

    let gcrop = gray.crop(rect);
    let mut inside: Vec<f64> = Vec::with_capacity(body.area);
    for (i, &m) in mask.pixels().iter().enumerate() {
        if m == 1 {
            inside.push(gcrop.pixels()[i]);
        }
    }
    let median = GrayImage::new(inside.len(), 1, inside).expect("mask is non-empty").median();
    let neutral: Vec<f64> = gcrop
        .pixels()
        .iter()
        .zip(mask.pixels())
        .map(|(&g, &m)| if m == 1 { g } else { median })
        .collect();
    let neutral = GrayImage::new(rect.width(), rect.height(), neutral).expect("same geometry");
    let levelled = deskew(&neutral, tilt)?;
    let mask_gray = GrayImage::from_fn(rect.width(), rect.height(), |r, c| f64::from(mask.get(r, c))).expect("0/1");
    let rmask = if tilt == 0.0 { mask_gray } else { rotate_gray(&mask_gray, -tilt, 0.0) };
    let rbin = BinaryImage::from_fn(rmask.width(), rmask.height(), |r, c| rmask.get(r, c) >= 0.5).expect("same geometry");
    let trim = rbin.bounding_box().ok_or(LocateError::EmptyPlate)?;
    let crop = levelled.crop(trim);

    let frame = RotationFrame::new(rect.width(), rect.height(), -tilt);
    let to_src = |r: usize, c: usize| {
        let (sr, sc) = if tilt == 0.0 { (r as f64, c as f64) } else { frame.to_source(r as f64, c as f64) };
        (sr + rect.row0 as f64, sc + rect.col0 as f64)
    };
    let corners = [
        to_src(trim.row0, trim.col0),
        to_src(trim.row0, trim.col1),
        to_src(trim.row1, trim.col1),
        to_src(trim.row1, trim.col0),
    ];
    let local = mask.bounding_box().ok_or(LocateError::EmptyPlate)?;
    let bbox = Rect::new(local.row0 + rect.row0, local.col0 + rect.col0, local.row1 + rect.row0, local.col1 + rect.col0);
    Ok(PlateRegion { crop, corners, tilt_degrees: tilt, bbox, mask: mask.crop(local) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn candidate(profile: Vec<u32>, aspect: f64, density: f64) -> PlateCandidate {
        PlateCandidate {
            label: 1,
            bbox: Rect::new(0, 0, profile.len() - 1, 9),
            area: 0,
            frame_width: 10,
            frame_height: profile.len(),
            jump_profile: profile,
            aspect_ratio: aspect,
            fill_density: density,
            tilt_degrees: 0.0,
        }
    }

    fn rect_mask(w: usize, h: usize, rw: usize, rh: usize) -> BinaryImage {
        let (r0, c0) = ((h - rh) / 2, (w - rw) / 2);
        BinaryImage::from_fn(w, h, |r, c| (r0..r0 + rh).contains(&r) && (c0..c0 + rw).contains(&c)).unwrap()
    }

    #[test]
    fn jump_profile_examples() {
        let img = BinaryImage::from_rows(&["0000000", "0101010", "0011100"]).unwrap();
        let p = jump_profile(&img, Rect::new(0, 0, 2, 6), JumpMode::Horizontal).unwrap();
        assert_eq!(p, vec![0, 6, 2]);
        assert!(jump_profile(&img, Rect::new(0, 0, 3, 6), JumpMode::Horizontal).is_err());
        let d = jump_profile(&img, Rect::new(0, 0, 2, 6), JumpMode::Diagonal).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d[2], 0);
    }

    #[test]
    fn validation_gates_in_order() {
        let cfg = LocatorConfig::default();
        let mut prof = vec![0; 3];
        prof.extend(vec![16; 13]);
        assert_eq!(validate_candidate(&candidate(prof.clone(), 3.0, 0.8), &cfg), Verdict::Accept);
        assert_eq!(
            validate_candidate(&candidate(vec![16; 12], 3.0, 0.8), &cfg),
            Verdict::Reject(RejectReason::JumpRun)
        );
        assert_eq!(
            validate_candidate(&candidate(vec![0; 20], 1.0, 0.1), &cfg),
            Verdict::Reject(RejectReason::JumpRun)
        );
        assert_eq!(
            validate_candidate(&candidate(prof.clone(), 7.0, 0.1), &cfg),
            Verdict::Reject(RejectReason::AspectRatio)
        );
        assert_eq!(
            validate_candidate(&candidate(prof, 2.0, 0.49), &cfg),
            Verdict::Reject(RejectReason::Density)
        );
        assert_eq!(RejectReason::JumpRun.to_string(), "jump-run");
    }

    #[test]
    fn tilt_examples() {
        assert_eq!(estimate_tilt(&rect_mask(80, 60, 50, 12)), 0.0);
        assert_eq!(estimate_tilt(&BinaryImage::zeros(5, 5).unwrap()), 0.0);
        let two = BinaryImage::from_rows(&["#..", "..#"]).unwrap();
        assert_eq!(estimate_tilt(&two), 0.0);
        let square = rect_mask(20, 20, 10, 10);
        assert_eq!(estimate_tilt(&square), 0.0);
        for deg in [10.0, -10.0, 25.0] {
            let rotated = rotate_binary(&rect_mask(90, 90, 60, 14), deg);
            let est = estimate_tilt(&rotated);
            assert!((est - deg).abs() < 1.0, "{deg} -> {est}");
        }
        let at45 = estimate_tilt(&rotate_binary(&rect_mask(90, 90, 60, 14), 45.0));
        assert!((at45.abs() - 45.0).abs() < 1.0, "{at45}");
    }

    #[test]
    fn deskew_contract() {
        let img = GrayImage::from_fn(7, 5, |r, c| ((r + c) % 3) as f64 / 2.0).unwrap();
        assert_eq!(deskew(&img, 0.0).unwrap(), img);
        assert_eq!(deskew(&img, 46.0), Err(LocateError::AngleOutOfRange(46.0)));
        assert!(deskew(&img, f64::NAN).is_err());
        assert!(deskew(&img, -45.0).is_ok());
    }

    #[test]
    fn deskew_levels_a_tilted_bar() {
        let m = rotate_binary(&rect_mask(100, 100, 70, 16), 10.0);
        let g = GrayImage::from_fn(m.width(), m.height(), |r, c| f64::from(m.get(r, c))).unwrap();
        let level = deskew(&g, estimate_tilt(&m)).unwrap();
        let back = BinaryImage::from_fn(level.width(), level.height(), |r, c| level.get(r, c) > 0.5).unwrap();
        assert!(estimate_tilt(&back).abs() < 2.0);
    }

    #[test]
    fn select_prefers_the_widest() {
        // Two bars, each with one perforated row so they have jumps.
        let bin = BinaryImage::from_fn(60, 40, |r, c| {
            let perforated = (r == 4 || r == 24) && c % 4 == 1;
            !perforated && ((2..8).contains(&r) && c < 50 || (20..30).contains(&r) && c < 30)
        })
        .unwrap();
        let regions = label_components(&bin, Connectivity::Eight);
        let cfg = LocatorConfig { min_run: 0, min_jumps: 0, min_region_area: 1, aspect_lo: 0.0, aspect_hi: 100.0, ..Default::default() };
        let best = select_plate(&regions, &bin, &cfg, Execution::Sequential).unwrap();
        assert_eq!(best.bbox.width(), 50);
        let none_cfg = LocatorConfig { min_region_area: 10_000, ..cfg };
        assert!(select_plate(&regions, &bin, &none_cfg, Execution::Sequential).is_none());
    }

    #[test]
    fn extract_plate_recovers_a_tilted_field() {
        let field = rotate_binary(&rect_mask(160, 120, 110, 26), 12.0);
        let gray = GrayImage::from_fn(field.width(), field.height(), |r, c| if field.is_set(r, c) { 0.9 } else { 0.1 }).unwrap();
        let bb = field.bounding_box().unwrap();
        let cand = PlateCandidate {
            label: 1,
            bbox: bb,
            area: field.count_ones(),
            frame_width: bb.width(),
            frame_height: bb.height(),
            jump_profile: vec![],
            aspect_ratio: 0.0,
            fill_density: 0.0,
            tilt_degrees: 0.0,
        };
        let plate = extract_plate(&gray, &field, &cand, &LocatorConfig::default()).unwrap();
        assert!((plate.tilt_degrees - 12.0).abs() < 1.0);
        assert_eq!(plate.bbox, bb);
        let (w, h) = (plate.crop.width() as f64, plate.crop.height() as f64);
        assert!((w - 110.0).abs() <= 3.0 && (h - 26.0).abs() <= 3.0, "{w}x{h}");
        // The right end is higher, so the top-right corner sits above the top-left.
        assert!(plate.corners[1].0 < plate.corners[0].0);
    }

    proptest! {
        #[test]
        fn validation_is_monotone(
            profile in prop::collection::vec(0u32..40, 1..40),
            aspect in 0.5f64..8.0,
            density in 0.0f64..1.0,
            run in 0usize..20, jumps in 0u32..30, dr in 0usize..5, dj in 0u32..5,
        ) {
            let c = candidate(profile, aspect, density);
            let lo = LocatorConfig { min_run: run, min_jumps: jumps, ..Default::default() };
            let hi = LocatorConfig { min_run: run + dr, min_jumps: jumps + dj, ..Default::default() };
            if !validate_candidate(&c, &lo).is_accept() {
                prop_assert!(!validate_candidate(&c, &hi).is_accept());
            }
        }

        #[test]
        fn complement_has_the_same_profile(
            (w, h, px) in (2usize..12, 1usize..12).prop_flat_map(|(w, h)| (Just(w), Just(h), prop::collection::vec(0u8..=1, w * h))),
            diagonal in any::<bool>(),
        ) {
            let img = BinaryImage::new(w, h, px).unwrap();
            let mode = if diagonal { JumpMode::Diagonal } else { JumpMode::Horizontal };
            let bbox = Rect::new(0, 0, h - 1, w - 1);
            prop_assert_eq!(jump_profile(&img, bbox, mode).unwrap(), jump_profile(&img.complement(), bbox, mode).unwrap());
        }

        #[test]
        fn tilt_is_scale_invariant(
            (w, h, px) in (2usize..10, 2usize..10).prop_flat_map(|(w, h)| (Just(w), Just(h), prop::collection::vec(0u8..=1, w * h))),
            k in 2usize..4,
        ) {
            let img = BinaryImage::new(w, h, px).unwrap();
            prop_assume!(img.count_ones() >= 3);
            let big = BinaryImage::from_fn(w * k, h * k, |r, c| img.is_set(r / k, c / k)).unwrap();
            prop_assert!((estimate_tilt(&img) - estimate_tilt(&big)).abs() < 1e-9);
        }

        #[test]
        fn tilt_round_trip(deg in -40.0f64..40.0) {
            let m = rotate_binary(&rect_mask(120, 120, 80, 20), deg);
            let g = GrayImage::from_fn(m.width(), m.height(), |r, c| f64::from(m.get(r, c))).unwrap();
            let level = deskew(&g, estimate_tilt(&m)).unwrap();
            let back = BinaryImage::from_fn(level.width(), level.height(), |r, c| level.get(r, c) > 0.5).unwrap();
            prop_assert!(estimate_tilt(&back).abs() < 2.0);
        }
    }
}
