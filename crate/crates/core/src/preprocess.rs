//! Image reconstruction and binarization: luma conversion, Gaussian
//! smoothing and the mean-plus-variance adaptive threshold.

use crate::exec::fill_rows;
use crate::raster::{BinaryImage, ColorImage, GrayImage};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("gaussian sigma must be a positive finite number, got {0}")]
    InvalidSigma(f64),
    #[error("gaussian radius must be at least 1")]
    InvalidRadius,
    #[error("fixed threshold must lie in [0, 1], got {0}")]
    ThresholdOutOfRange(f64),
}

/// Largest threshold the adaptive rule may use; keeps the output non-trivial
/// when mean + variance exceeds the intensity range.
pub const MAX_ADAPTIVE_THRESHOLD: f64 = 1.0 - 1e-6;

const LUMA_R: f64 = 0.299;
const LUMA_G: f64 = 0.587;
const LUMA_B: f64 = 0.114;

pub fn luma(rgb: [u8; 3]) -> f64 {
    let v = (LUMA_R * rgb[0] as f64 + LUMA_G * rgb[1] as f64 + LUMA_B * rgb[2] as f64) / 255.0;
    v.clamp(0.0, 1.0)
}

/// Weighted luma, rescaled from 0..255 to `[0, 1]`.
pub fn to_grayscale(img: &ColorImage) -> GrayImage {
    let pixels = img.pixels().iter().map(|&p| luma(p)).collect();
    GrayImage::new(img.width(), img.height(), pixels).expect("luma stays in [0, 1]")
}

/// Normalized 1-D Gaussian taps for offsets `-radius..=radius`.
pub fn gaussian_taps(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let raw: Vec<f64> = (-r..=r)
        .map(|d| (-0.5 * (d * d) as f64 / (sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

/// Convolves with the normalized `(2r+1)^2` kernel `exp(-0.5 d^2 / sigma^2)`,
/// replicating edge pixels. The kernel is separable, so it is applied as a
/// row pass followed by a column pass.
pub fn gaussian_smooth(img: &GrayImage, sigma: f64, radius: usize) -> Result<GrayImage, PreprocessError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(PreprocessError::InvalidSigma(sigma));
    }
    if radius == 0 {
        return Err(PreprocessError::InvalidRadius);
    }
    let taps = gaussian_taps(sigma, radius);
    let (w, h) = (img.width(), img.height());
    let src = img.pixels();
    let r = radius as isize;

    let mut horiz = vec![0.0; w * h];
    fill_rows(&mut horiz, w, |row, out| {
        let line = &src[row * w..(row + 1) * w];
        for (c, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let cc = (c as isize + k as isize - r).clamp(0, w as isize - 1) as usize;
                acc += t * line[cc];
            }
            *o = acc;
        }
    });

    let mut out = vec![0.0; w * h];
    fill_rows(&mut out, w, |row, line| {
        for (c, o) in line.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let rr = (row as isize + k as isize - r).clamp(0, h as isize - 1) as usize;
                acc += t * horiz[rr * w + c];
            }
            *o = acc;
        }
    });
    Ok(GrayImage::from_clamped(w, h, out).expect("dimensions unchanged"))
}

/// Global intensity statistics driving the adaptive threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageStats {
    pub mean: f64,
    /// Population variance (divisor `n * m`).
    pub variance: f64,
    /// `mean + variance`, before any clamping.
    pub threshold: f64,
}

pub fn image_stats(img: &GrayImage) -> ImageStats {
    let px = img.pixels();
    let n = px.len() as f64;
    let (lo, hi) = px
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    // Rounding in the sum can push the mean outside the data range (e.g. a
    // constant image); the clamp keeps constant images exactly thresholded.
    let mean = (px.iter().sum::<f64>() / n).clamp(lo, hi);
    let variance = px.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    ImageStats {
        mean,
        variance,
        threshold: mean + variance,
    }
}

/// Pixel is 1 iff its intensity strictly exceeds `min(mean + variance, 1 - 1e-6)`.
///
/// For intensities in `[0, 1]` the unclamped threshold never exceeds 1, so the
/// clamp only engages for near-white images. A constant image has nothing
/// above its own mean and always binarizes to zeros.
pub fn adaptive_threshold(img: &GrayImage) -> BinaryImage {
    let stats = image_stats(img);
    if stats.variance == 0.0 {
        return threshold_at(img, stats.mean);
    }
    let mut t = stats.threshold;
    if t > MAX_ADAPTIVE_THRESHOLD {
        log::warn!(
            "adaptive threshold {:.6} exceeds the intensity range; clamped to {}",
            t,
            MAX_ADAPTIVE_THRESHOLD
        );
        t = MAX_ADAPTIVE_THRESHOLD;
    }
    threshold_at(img, t)
}

pub fn fixed_threshold(img: &GrayImage, t: f64) -> Result<BinaryImage, PreprocessError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(PreprocessError::ThresholdOutOfRange(t));
    }
    Ok(threshold_at(img, t))
}

fn threshold_at(img: &GrayImage, t: f64) -> BinaryImage {
    let pixels = img.pixels().iter().map(|&v| u8::from(v > t)).collect();
    BinaryImage::from_raw_unchecked(img.width(), img.height(), pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray(w: usize, h: usize, px: Vec<f64>) -> GrayImage {
        GrayImage::new(w, h, px).unwrap()
    }

    #[test]
    fn grayscale_corner_cases() {
        let white = ColorImage::filled(3, 2, [255, 255, 255]).unwrap();
        assert!(to_grayscale(&white).pixels().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let black = ColorImage::filled(3, 2, [0, 0, 0]).unwrap();
        assert!(to_grayscale(&black).pixels().iter().all(|&v| v == 0.0));
        // 0.299 * 255 = 76.245; 76.245 / 255 = 0.299
        let red = ColorImage::filled(1, 1, [255, 0, 0]).unwrap();
        assert!((to_grayscale(&red).get(0, 0) - 76.245 / 255.0).abs() < 1e-15);
        assert!((to_grayscale(&red).get(0, 0) - 0.299).abs() < 1e-15);
    }

    #[test]
    fn gaussian_rejects_bad_parameters() {
        let g = GrayImage::filled(4, 4, 0.5).unwrap();
        assert_eq!(gaussian_smooth(&g, 0.0, 2), Err(PreprocessError::InvalidSigma(0.0)));
        assert!(gaussian_smooth(&g, -1.0, 2).is_err());
        assert_eq!(gaussian_smooth(&g, 1.0, 0), Err(PreprocessError::InvalidRadius));
    }

    #[test]
    fn gaussian_preserves_constants() {
        let g = GrayImage::filled(9, 7, 0.37).unwrap();
        for sigma in [0.3, 1.0, 4.0] {
            let s = gaussian_smooth(&g, sigma, 3).unwrap();
            assert!(s.pixels().iter().all(|&v| (v - 0.37).abs() < 1e-12));
        }
    }

    #[test]
    fn gaussian_impulse_reproduces_kernel() {
        let (w, h, sigma, radius) = (15usize, 15usize, 1.3, 3usize);
        let mut px = vec![0.0; w * h];
        px[7 * w + 7] = 1.0;
        let out = gaussian_smooth(&gray(w, h, px), sigma, radius).unwrap();
        // Oracle: direct 2-D kernel evaluation.
        let r = radius as isize;
        let mut kernel = vec![];
        for dy in -r..=r {
            for dx in -r..=r {
                kernel.push((-0.5 * ((dx * dx + dy * dy) as f64) / (sigma * sigma)).exp());
            }
        }
        let total: f64 = kernel.iter().sum();
        for dy in -r..=r {
            for dx in -r..=r {
                let k = kernel[((dy + r) * (2 * r + 1) + dx + r) as usize] / total;
                let got = out.get((7 + dy) as usize, (7 + dx) as usize);
                assert!((got - k).abs() < 1e-12, "({dy},{dx}) {got} vs {k}");
            }
        }
        assert!((out.pixels().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_tiny_sigma_is_identity() {
        let px: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37) % 1.0).collect();
        let g = gray(6, 5, px);
        let s = gaussian_smooth(&g, 1e-6, 1).unwrap();
        for (a, b) in g.pixels().iter().zip(s.pixels()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn stats_examples() {
        let s = image_stats(&GrayImage::filled(5, 5, 0.5).unwrap());
        assert_eq!((s.mean, s.variance, s.threshold), (0.5, 0.0, 0.5));
        let s = image_stats(&gray(2, 1, vec![0.0, 1.0]));
        assert_eq!((s.mean, s.variance, s.threshold), (0.5, 0.25, 0.75));
        assert_eq!(image_stats(&GrayImage::filled(3, 3, 0.0).unwrap()).threshold, 0.0);
    }

    #[test]
    fn adaptive_threshold_examples() {
        for c in [0.0, 0.1, 0.3, 0.7, 1.0] {
            let b = adaptive_threshold(&GrayImage::filled(7, 3, c).unwrap());
            assert_eq!(b.count_ones(), 0, "constant {c}");
        }
        // mean 0.55, variance 0.1225, threshold 0.6725: 0.2 < t < 0.9
        let g = GrayImage::from_fn(8, 4, |_, c| if c < 4 { 0.2 } else { 0.9 }).unwrap();
        let b = adaptive_threshold(&g);
        for r in 0..4 {
            for c in 0..8 {
                assert_eq!(b.get(r, c), u8::from(c >= 4));
            }
        }
    }

    #[test]
    fn adaptive_threshold_clamps_near_white_images() {
        let g = gray(4, 1, vec![1.0, 1.0, 1.0, 1.0 - 1e-8]);
        let s = image_stats(&g);
        assert!(s.threshold > MAX_ADAPTIVE_THRESHOLD && s.threshold <= 1.0);
        // Unclamped, only the exact-1.0 pixels would pass; clamped, all four do.
        assert_eq!(adaptive_threshold(&g).count_ones(), 4);
    }

    #[test]
    fn fixed_threshold_examples() {
        let g = gray(3, 1, vec![0.0, 0.2, 1.0]);
        assert_eq!(fixed_threshold(&g, 0.0).unwrap().pixels(), &[0, 1, 1]);
        assert_eq!(fixed_threshold(&g, 1.0).unwrap().count_ones(), 0);
        let half = GrayImage::filled(4, 4, 0.5).unwrap();
        assert_eq!(fixed_threshold(&half, 0.4).unwrap().count_ones(), 16);
        assert!(fixed_threshold(&g, 1.2).is_err());
        assert!(fixed_threshold(&g, -0.1).is_err());
        assert!(fixed_threshold(&g, f64::NAN).is_err());
    }

    #[test]
    fn dark_fixture_binarizations_differ_between_rules() {
        // Low-light scene: dim plate-like band on a darker field.
        let g = GrayImage::from_fn(40, 20, |r, c| {
            let base = 0.08 + 0.002 * c as f64;
            if (6..14).contains(&r) && (8..32).contains(&c) {
                if c % 4 == 0 { 0.05 } else { 0.34 }
            } else {
                base
            }
        })
        .unwrap();
        let adaptive = adaptive_threshold(&g);
        let low = fixed_threshold(&g, 0.4).unwrap();
        let high = fixed_threshold(&g, 0.7).unwrap();
        assert_ne!(adaptive, low);
        assert_ne!(adaptive, high);
        assert!(adaptive.count_ones() > 0);
        assert_eq!(low.count_ones(), 0);
    }

    proptest! {
        #[test]
        fn gray_weights_sum_to_one(v in 0u8..=255) {
            let g = to_grayscale(&ColorImage::filled(1, 1, [v, v, v]).unwrap());
            prop_assert!((g.get(0, 0) - v as f64 / 255.0).abs() < 1e-12);
        }

        #[test]
        fn variance_identity(px in prop::collection::vec(0.0f64..=1.0, 1..200)) {
            let n = px.len();
            let s = image_stats(&gray(n, 1, px.clone()));
            let mean_sq = px.iter().map(|v| v * v).sum::<f64>() / n as f64;
            prop_assert!(s.variance >= 0.0);
            prop_assert!((s.variance - (mean_sq - s.mean * s.mean)).abs() < 1e-12);
            prop_assert_eq!(s.threshold, s.mean + s.variance);
        }

        #[test]
        fn fixed_threshold_is_monotone(
            px in prop::collection::vec(0.0f64..=1.0, 1..100),
            t1 in 0.0f64..=1.0,
            t2 in 0.0f64..=1.0,
        ) {
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            let g = gray(px.len(), 1, px);
            let a = fixed_threshold(&g, lo).unwrap();
            let b = fixed_threshold(&g, hi).unwrap();
            prop_assert!(a.pixels().iter().zip(b.pixels()).all(|(x, y)| x >= y));
        }

        #[test]
        fn smoothing_preserves_mean_of_interior_mass(
            vals in prop::collection::vec(0.0f64..=1.0, 16),
            sigma in 0.5f64..2.0,
        ) {
            // 4x4 pattern in the middle of a zero field far from the border.
            let g = GrayImage::from_fn(24, 24, |r, c| {
                if (10..14).contains(&r) && (10..14).contains(&c) { vals[(r - 10) * 4 + c - 10] } else { 0.0 }
            }).unwrap();
            let s = gaussian_smooth(&g, sigma, 3).unwrap();
            let before: f64 = g.pixels().iter().sum();
            let after: f64 = s.pixels().iter().sum();
            prop_assert!((before - after).abs() / (24.0 * 24.0) < 1e-6);
        }
    }
}
