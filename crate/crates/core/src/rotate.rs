//! Rotation about the image center onto an enlarged canvas.
//!
//! Angles are in degrees and positive angles turn the content
//! counter-clockwise as seen on screen (rows grow downwards).

use crate::raster::{BinaryImage, GrayImage};

/// Canvas geometry shared by every rotation of a `width x height` image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationFrame {
    pub src_width: usize,
    pub src_height: usize,
    pub width: usize,
    pub height: usize,
    cos: f64,
    sin: f64,
}

impl RotationFrame {
    pub fn new(src_width: usize, src_height: usize, degrees: f64) -> Self {
        let (sin, cos) = degrees.to_radians().sin_cos();
        // The tolerance keeps exact multiples of 90 degrees from growing a
        // spurious extra row or column through rounding noise.
        let span = |extent: f64| (extent - 1e-9).ceil().max(1.0) as usize;
        let w = span(src_width as f64 * cos.abs() + src_height as f64 * sin.abs());
        let h = span(src_width as f64 * sin.abs() + src_height as f64 * cos.abs());
        RotationFrame { src_width, src_height, width: w, height: h, cos, sin }
    }

    fn centers(&self) -> ((f64, f64), (f64, f64)) {
        let src = ((self.src_height as f64 - 1.0) / 2.0, (self.src_width as f64 - 1.0) / 2.0);
        let dst = ((self.height as f64 - 1.0) / 2.0, (self.width as f64 - 1.0) / 2.0);
        (src, dst)
    }

    /// Source `(row, col)` that lands on canvas `(row, col)`.
    pub fn to_source(&self, row: f64, col: f64) -> (f64, f64) {
        let ((sr, sc), (dr, dc)) = self.centers();
        let (x, y) = (col - dc, row - dr);
        let sx = x * self.cos - y * self.sin;
        let sy = x * self.sin + y * self.cos;
        (sy + sr, sx + sc)
    }

    /// Canvas `(row, col)` where source `(row, col)` lands.
    pub fn to_canvas(&self, row: f64, col: f64) -> (f64, f64) {
        let ((sr, sc), (dr, dc)) = self.centers();
        let (x, y) = (col - sc, row - sr);
        let cx = x * self.cos + y * self.sin;
        let cy = -x * self.sin + y * self.cos;
        (cy + dr, cx + dc)
    }
}

fn bilinear(img: &GrayImage, row: f64, col: f64, fill: f64) -> f64 {
    const EPS: f64 = 1e-9;
    let (w, h) = (img.width() as f64, img.height() as f64);
    if row < -EPS || col < -EPS || row > h - 1.0 + EPS || col > w - 1.0 + EPS {
        return fill;
    }
    let row = row.clamp(0.0, h - 1.0);
    let col = col.clamp(0.0, w - 1.0);
    let (r0, c0) = (row.floor() as usize, col.floor() as usize);
    let r1 = (r0 + 1).min(img.height() - 1);
    let c1 = (c0 + 1).min(img.width() - 1);
    let (fr, fc) = (row - r0 as f64, col - c0 as f64);
    let top = img.get(r0, c0) * (1.0 - fc) + img.get(r0, c1) * fc;
    let bottom = img.get(r1, c0) * (1.0 - fc) + img.get(r1, c1) * fc;
    top * (1.0 - fr) + bottom * fr
}

/// Bilinear rotation; canvas cells whose preimage falls outside get `fill`.
pub fn rotate_gray(img: &GrayImage, degrees: f64, fill: f64) -> GrayImage {
    if degrees == 0.0 {
        return img.clone();
    }
    let frame = RotationFrame::new(img.width(), img.height(), degrees);
    GrayImage::from_fn(frame.width, frame.height, |r, c| {
        let (sr, sc) = frame.to_source(r as f64, c as f64);
        bilinear(img, sr, sc, fill)
    })
    .expect("bilinear blend of unit-range samples stays in range")
}

/// Nearest-neighbour rotation; outside cells are 0.
pub fn rotate_binary(img: &BinaryImage, degrees: f64) -> BinaryImage {
    if degrees == 0.0 {
        return img.clone();
    }
    let frame = RotationFrame::new(img.width(), img.height(), degrees);
    BinaryImage::from_fn(frame.width, frame.height, |r, c| {
        let (sr, sc) = frame.to_source(r as f64, c as f64);
        let (sr, sc) = (sr.round(), sc.round());
        sr >= 0.0 && sc >= 0.0 && img.get_or(sr as isize, sc as isize, 0) == 1
    })
    .expect("canvas is non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_turn_is_exact() {
        let img = GrayImage::from_fn(4, 2, |r, c| (r * 4 + c) as f64 / 8.0).unwrap();
        let rot = rotate_gray(&img, 90.0, 0.0);
        assert_eq!((rot.width(), rot.height()), (2, 4));
        // Counter-clockwise: the top-right source pixel ends at the top-left.
        assert!((rot.get(0, 0) - img.get(0, 3)).abs() < 1e-9);
        assert!((rot.get(3, 1) - img.get(1, 0)).abs() < 1e-9);
    }

    #[test]
    fn mappings_are_inverse() {
        let f = RotationFrame::new(37, 11, 23.0);
        let (r, c) = f.to_canvas(3.0, 30.0);
        let (sr, sc) = f.to_source(r, c);
        assert!((sr - 3.0).abs() < 1e-9 && (sc - 30.0).abs() < 1e-9);
    }

    #[test]
    fn counter_clockwise_raises_the_right_end() {
        let bar = BinaryImage::from_fn(41, 41, |r, c| r == 20 && (5..36).contains(&c)).unwrap();
        let rot = rotate_binary(&bar, 30.0);
        let rows_of = |col_pred: &dyn Fn(usize) -> bool| {
            let mut v = Vec::new();
            for r in 0..rot.height() {
                for c in 0..rot.width() {
                    if rot.is_set(r, c) && col_pred(c) {
                        v.push(r);
                    }
                }
            }
            v.iter().sum::<usize>() as f64 / v.len() as f64
        };
        let mid = rot.width() / 2;
        assert!(rows_of(&|c| c > mid + 5) < rows_of(&|c| c + 5 < mid));
    }
}
