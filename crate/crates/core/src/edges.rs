//! Gradient edge maps over binary images.
//!
//! Every operator is a pair (or a single) correlation mask applied with
//! replicated borders. Sobel is the pipeline default; the other masks exist
//! for operator comparisons and share the same convolution core.

use crate::exec::fill_rows;
use crate::raster::BinaryImage;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EdgeError {
    #[error("edge threshold must be a non-negative number, got {0}")]
    InvalidThreshold(f64),
}

/// Per-pixel gradient magnitude, all values `>= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMap {
    width: usize,
    height: usize,
    magnitudes: Vec<f64>,
}

impl EdgeMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.magnitudes[row * self.width + col]
    }

    pub fn max(&self) -> f64 {
        self.magnitudes.iter().copied().fold(0.0, f64::max)
    }

    /// Scales magnitudes into 0..255 for PGM dumps.
    pub fn to_u8(&self) -> Vec<u8> {
        let m = self.max();
        if m == 0.0 {
            return vec![0; self.magnitudes.len()];
        }
        self.magnitudes.iter().map(|v| (v / m * 255.0).round() as u8).collect()
    }
}

/// Correlation mask with an anchor cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    rows: usize,
    cols: usize,
    anchor: (usize, usize),
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(rows: usize, cols: usize, anchor: (usize, usize), weights: Vec<f64>) -> Self {
        assert_eq!(weights.len(), rows * cols);
        assert!(anchor.0 < rows && anchor.1 < cols);
        Kernel { rows, cols, anchor, weights }
    }

    /// Square mask anchored at its center.
    pub fn centered<const N: usize>(w: [[f64; N]; N]) -> Self {
        assert!(N % 2 == 1);
        Kernel::new(N, N, (N / 2, N / 2), w.concat())
    }

    fn respond(&self, img: &BinaryImage, row: usize, col: usize) -> f64 {
        let (h, w) = (img.height() as isize, img.width() as isize);
        let mut acc = 0.0;
        for kr in 0..self.rows {
            let rr = (row as isize + kr as isize - self.anchor.0 as isize).clamp(0, h - 1);
            for kc in 0..self.cols {
                let wgt = self.weights[kr * self.cols + kc];
                if wgt != 0.0 {
                    let cc = (col as isize + kc as isize - self.anchor.1 as isize).clamp(0, w - 1);
                    acc += wgt * img.get(rr as usize, cc as usize) as f64;
                }
            }
        }
        acc
    }
}

/// A gradient operator: magnitude is `sqrt(gx^2 + gy^2)`, or `|gx|` when
/// the operator has a single mask.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientOperator {
    pub gx: Kernel,
    pub gy: Option<Kernel>,
}

impl GradientOperator {
    pub fn apply(&self, img: &BinaryImage) -> EdgeMap {
        let (w, h) = (img.width(), img.height());
        let mut magnitudes = vec![0.0; w * h];
        fill_rows(&mut magnitudes, w, |r, row| {
            for (c, m) in row.iter_mut().enumerate() {
                let gx = self.gx.respond(img, r, c);
                *m = match &self.gy {
                    Some(k) => {
                        let gy = k.respond(img, r, c);
                        (gx * gx + gy * gy).sqrt()
                    }
                    None => gx.abs(),
                };
            }
        });
        EdgeMap { width: w, height: h, magnitudes }
    }

    /// Largest magnitude this operator produces on an ideal vertical or
    /// horizontal unit step; used to put thresholds of different operators
    /// on a common scale.
    pub fn step_gain(&self) -> f64 {
        let vertical = BinaryImage::from_fn(9, 9, |_, c| c >= 4).expect("fixture");
        let horizontal = BinaryImage::from_fn(9, 9, |r, _| r >= 4).expect("fixture");
        self.apply(&vertical).max().max(self.apply(&horizontal).max())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    /// Responds to vertical edges (horizontal intensity change).
    Vertical,
    Horizontal,
    #[default]
    Both,
}

pub fn sobel_vertical_mask() -> Kernel {
    Kernel::centered([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
}

pub fn sobel_horizontal_mask() -> Kernel {
    Kernel::centered([[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]])
}

pub fn sobel_operator(direction: Direction) -> GradientOperator {
    match direction {
        Direction::Vertical => GradientOperator { gx: sobel_vertical_mask(), gy: None },
        Direction::Horizontal => GradientOperator { gx: sobel_horizontal_mask(), gy: None },
        Direction::Both => GradientOperator {
            gx: sobel_vertical_mask(),
            gy: Some(sobel_horizontal_mask()),
        },
    }
}

pub fn sobel_edges(img: &BinaryImage, direction: Direction) -> EdgeMap {
    sobel_operator(direction).apply(img)
}

/// Pixel is 1 iff its magnitude strictly exceeds `t`.
pub fn binarize_edges(em: &EdgeMap, t: f64) -> Result<BinaryImage, EdgeError> {
    if t.is_nan() || t < 0.0 {
        return Err(EdgeError::InvalidThreshold(t));
    }
    let pixels = em.magnitudes.iter().map(|&m| u8::from(m > t)).collect();
    Ok(BinaryImage::from_raw_unchecked(em.width, em.height, pixels))
}

/// `mean + 2 * stddev` of the nonzero magnitudes; 0 for an empty map.
pub fn statistical_cut(em: &EdgeMap) -> f64 {
    let nz: Vec<f64> = em.magnitudes.iter().copied().filter(|&m| m > 0.0).collect();
    if nz.is_empty() {
        return 0.0;
    }
    let n = nz.len() as f64;
    let mean = nz.iter().sum::<f64>() / n;
    let var = nz.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / n;
    mean + 2.0 * var.sqrt()
}

/// Operators available to the pipeline; Sobel is the default and the rest
/// exist for comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgeOperator {
    #[default]
    Sobel,
    Prewitt,
    Roberts,
    /// 5x5 Laplacian of Gaussian; a single mask, so `direction` is ignored.
    Log,
}

impl EdgeOperator {
    pub const ALL: [EdgeOperator; 4] = [EdgeOperator::Sobel, EdgeOperator::Prewitt, EdgeOperator::Roberts, EdgeOperator::Log];

    pub fn name(&self) -> &'static str {
        match self {
            EdgeOperator::Sobel => "sobel",
            EdgeOperator::Prewitt => "prewitt",
            EdgeOperator::Roberts => "roberts",
            EdgeOperator::Log => "log",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        EdgeOperator::ALL.into_iter().find(|o| o.name() == s)
    }

    pub fn gradient(&self, direction: Direction) -> GradientOperator {
        let pair = |gx: Kernel, gy: Kernel| match direction {
            Direction::Vertical => GradientOperator { gx, gy: None },
            Direction::Horizontal => GradientOperator { gx: gy, gy: None },
            Direction::Both => GradientOperator { gx, gy: Some(gy) },
        };
        match self {
            EdgeOperator::Sobel => sobel_operator(direction),
            EdgeOperator::Prewitt => pair(
                Kernel::centered([[-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0]]),
                Kernel::centered([[-1.0, -1.0, -1.0], [0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]),
            ),
            EdgeOperator::Roberts => pair(
                Kernel::new(2, 2, (0, 0), vec![1.0, 0.0, 0.0, -1.0]),
                Kernel::new(2, 2, (0, 0), vec![0.0, 1.0, -1.0, 0.0]),
            ),
            EdgeOperator::Log => GradientOperator {
                gx: Kernel::centered([
                    [0.0, 0.0, -1.0, 0.0, 0.0],
                    [0.0, -1.0, -2.0, -1.0, 0.0],
                    [-1.0, -2.0, 16.0, -2.0, -1.0],
                    [0.0, -1.0, -2.0, -1.0, 0.0],
                    [0.0, 0.0, -1.0, 0.0, 0.0],
                ]),
                gy: None,
            },
        }
    }
}

/// How an edge map is cut into a binary image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeCut {
    /// A fraction of the operator's response to an ideal unit step.
    Relative(f64),
    /// [`statistical_cut`] of the map itself.
    Statistical,
    Absolute(f64),
}

impl Default for EdgeCut {
    fn default() -> Self {
        EdgeCut::Relative(0.5)
    }
}

impl EdgeCut {
    pub fn threshold(&self, op: &GradientOperator, em: &EdgeMap) -> f64 {
        match *self {
            EdgeCut::Relative(f) => f * op.step_gain(),
            EdgeCut::Statistical => statistical_cut(em),
            EdgeCut::Absolute(t) => t,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn step(w: usize, h: usize) -> BinaryImage {
        BinaryImage::from_fn(w, h, |_, c| c >= w / 2).unwrap()
    }

    #[test]
    fn constant_images_have_no_edges() {
        for v in [false, true] {
            let img = BinaryImage::from_fn(6, 5, |_, _| v).unwrap();
            for d in [Direction::Vertical, Direction::Horizontal, Direction::Both] {
                assert_eq!(sobel_edges(&img, d).max(), 0.0);
            }
        }
    }

    #[test]
    fn vertical_step_by_hand() {
        // Step between columns 3 and 4: both flanking columns see
        // (1 + 2 + 1) * (1 - 0) = 4, every other column sees 0.
        let img = step(8, 6);
        let v = sobel_edges(&img, Direction::Vertical);
        let hz = sobel_edges(&img, Direction::Horizontal);
        for r in 1..5 {
            for c in 1..7 {
                let expect = if c == 3 || c == 4 { 4.0 } else { 0.0 };
                assert_eq!(v.get(r, c), expect, "({r},{c})");
                assert_eq!(hz.get(r, c), 0.0);
            }
        }
        let cut = binarize_edges(&v, 2.0).unwrap();
        for r in 0..6 {
            for c in 0..8 {
                assert_eq!(cut.get(r, c), u8::from(c == 3 || c == 4));
            }
        }
    }

    #[test]
    fn binarize_edge_cases() {
        let zero = sobel_edges(&BinaryImage::zeros(4, 4).unwrap(), Direction::Both);
        assert_eq!(binarize_edges(&zero, 0.0).unwrap().count_ones(), 0);
        let v = sobel_edges(&step(8, 6), Direction::Both);
        assert_eq!(binarize_edges(&v, f64::MAX).unwrap().count_ones(), 0);
        assert!(binarize_edges(&v, -1.0).is_err());
        assert!(binarize_edges(&v, f64::NAN).is_err());
    }

    #[test]
    fn sobel_step_gain_is_four() {
        assert_eq!(sobel_operator(Direction::Both).step_gain(), 4.0);
    }

    #[test]
    fn statistical_cut_of_uniform_magnitudes() {
        let v = sobel_edges(&step(8, 6), Direction::Vertical);
        // Every nonzero magnitude is 4, so the spread is zero.
        assert_eq!(statistical_cut(&v), 4.0);
    }


    #[test]
    fn every_operator_sees_a_step_and_ignores_flat_regions() {
        let img = step(12, 9);
        let flat = BinaryImage::zeros(12, 9).unwrap();
        for op in EdgeOperator::ALL {
            let g = op.gradient(Direction::Both);
            assert!(g.step_gain() > 0.0, "{}", op.name());
            assert!(g.apply(&img).max() > 0.0);
            assert_eq!(g.apply(&flat).max(), 0.0);
            assert_eq!(EdgeOperator::parse(op.name()), Some(op));
            let em = g.apply(&img);
            let cut = binarize_edges(&em, EdgeCut::default().threshold(&g, &em)).unwrap();
            assert!(cut.count_ones() > 0, "{}", op.name());
        }
    }

    proptest! {
        #[test]
        fn both_dominates_components(bits in prop::collection::vec(0u8..=1, 64)) {
            let img = BinaryImage::new(8, 8, bits).unwrap();
            let v = sobel_edges(&img, Direction::Vertical);
            let h = sobel_edges(&img, Direction::Horizontal);
            let b = sobel_edges(&img, Direction::Both);
            for i in 0..64 {
                let (x, y, z) = (v.magnitudes()[i], h.magnitudes()[i], b.magnitudes()[i]);
                prop_assert!(z >= x.max(y));
                prop_assert_eq!(z == 0.0, x == 0.0 && y == 0.0);
            }
        }
    }
}
