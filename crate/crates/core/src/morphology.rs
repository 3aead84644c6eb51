//! Binary erosion, dilation, opening/closing and hole filling.
//!
//! Structuring elements are odd-sized masks whose origin is the center cell.
//! Cells outside the image read as `outside` (0 for the plain entry points),
//! so erosion shrinks shapes that touch the frame.

use crate::exec::fill_rows;
use crate::raster::BinaryImage;
use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SeError {
    #[error("structuring element dimensions must be odd and >= 1, got {height}x{width}")]
    EvenOrZero { width: usize, height: usize },
    #[error("structuring element mask has {actual} cells, expected {expected}")]
    MaskLength { expected: usize, actual: usize },
    #[error("structuring element mask has no set cell")]
    Empty,
    #[error("cannot parse structuring element {0:?}; expected HEIGHTxWIDTH such as 5x15")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    width: usize,
    height: usize,
    mask: Vec<u8>,
    /// `(drow, dcol)` offsets of the set cells relative to the origin.
    offsets: Vec<(isize, isize)>,
}

impl StructuringElement {
    pub fn new(width: usize, height: usize, mask: Vec<u8>) -> Result<Self, SeError> {
        if width.is_multiple_of(2) || height.is_multiple_of(2) {
            return Err(SeError::EvenOrZero { width, height });
        }
        if mask.len() != width * height {
            return Err(SeError::MaskLength { expected: width * height, actual: mask.len() });
        }
        let (or, oc) = ((height / 2) as isize, (width / 2) as isize);
        let offsets: Vec<(isize, isize)> = mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m != 0)
            .map(|(i, _)| ((i / width) as isize - or, (i % width) as isize - oc))
            .collect();
        if offsets.is_empty() {
            return Err(SeError::Empty);
        }
        let mask = mask.into_iter().map(|m| u8::from(m != 0)).collect();
        Ok(StructuringElement { width, height, mask, offsets })
    }

    /// Full rectangle of `height` rows and `width` columns.
    pub fn rect(height: usize, width: usize) -> Result<Self, SeError> {
        StructuringElement::new(width, height, vec![1; width * height])
    }

    pub fn square3() -> Self {
        StructuringElement::rect(3, 3).expect("3x3 is valid")
    }

    pub fn identity() -> Self {
        StructuringElement::rect(1, 1).expect("1x1 is valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn mask(&self) -> &[u8] {
        &self.mask
    }

    pub fn offsets(&self) -> &[(isize, isize)] {
        &self.offsets
    }

    pub fn origin_is_set(&self) -> bool {
        self.mask[(self.height / 2) * self.width + self.width / 2] == 1
    }

    /// Point reflection through the origin.
    pub fn reflect(&self) -> Self {
        let mask = self.mask.iter().rev().copied().collect();
        StructuringElement::new(self.width, self.height, mask).expect("reflection keeps shape")
    }
}

impl fmt::Display for StructuringElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

impl FromStr for StructuringElement {
    type Err = SeError;

    /// Parses a full rectangle written as `HEIGHTxWIDTH`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse_err = || SeError::Parse(s.to_string());
        let (h, w) = s.trim().split_once(['x', 'X']).ok_or_else(parse_err)?;
        let h: usize = h.trim().parse().map_err(|_| parse_err())?;
        let w: usize = w.trim().parse().map_err(|_| parse_err())?;
        StructuringElement::rect(h, w)
    }
}

fn probe(img: &BinaryImage, se: &StructuringElement, outside: u8, sign: isize, all: bool) -> BinaryImage {
    let (w, h) = (img.width(), img.height());
    let mut out = vec![0u8; w * h];
    fill_rows(&mut out, w, |r, row| {
        for (c, px) in row.iter_mut().enumerate() {
            let mut hits = se
                .offsets
                .iter()
                .map(|&(dr, dc)| img.get_or(r as isize + sign * dr, c as isize + sign * dc, outside) == 1);
            *px = u8::from(if all { hits.all(|b| b) } else { hits.any(|b| b) });
        }
    });
    BinaryImage::from_raw_unchecked(w, h, out)
}

/// `X` is set iff every set cell of `se` placed at `X` lands on a set pixel.
pub fn erode(img: &BinaryImage, se: &StructuringElement) -> BinaryImage {
    erode_with_border(img, se, 0)
}

/// `X` is set iff the reflected `se` placed at `X` overlaps a set pixel.
pub fn dilate(img: &BinaryImage, se: &StructuringElement) -> BinaryImage {
    dilate_with_border(img, se, 0)
}

/// Erosion where cells beyond the frame read as `outside` (0 or 1).
pub fn erode_with_border(img: &BinaryImage, se: &StructuringElement, outside: u8) -> BinaryImage {
    probe(img, se, outside, 1, true)
}

/// Dilation where cells beyond the frame read as `outside` (0 or 1).
pub fn dilate_with_border(img: &BinaryImage, se: &StructuringElement, outside: u8) -> BinaryImage {
    probe(img, se, outside, -1, false)
}

/// Erosion followed by dilation.
pub fn open(img: &BinaryImage, erode_se: &StructuringElement, dilate_se: &StructuringElement) -> BinaryImage {
    dilate(&erode(img, erode_se), dilate_se)
}

/// Dilation followed by erosion with the same element.
pub fn close(img: &BinaryImage, se: &StructuringElement) -> BinaryImage {
    erode(&dilate(img, se), se)
}

/// Sets every 4-connected background region that does not reach the frame.
pub fn fill_holes(img: &BinaryImage) -> BinaryImage {
    let (w, h) = (img.width(), img.height());
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::new();
    let seed = |r: usize, c: usize, outside: &mut Vec<bool>, queue: &mut VecDeque<(usize, usize)>| {
        let i = r * w + c;
        if img.pixels()[i] == 0 && !outside[i] {
            outside[i] = true;
            queue.push_back((r, c));
        }
    };
    for c in 0..w {
        seed(0, c, &mut outside, &mut queue);
        seed(h - 1, c, &mut outside, &mut queue);
    }
    for r in 0..h {
        seed(r, 0, &mut outside, &mut queue);
        seed(r, w - 1, &mut outside, &mut queue);
    }
    while let Some((r, c)) = queue.pop_front() {
        if r > 0 {
            seed(r - 1, c, &mut outside, &mut queue);
        }
        if r + 1 < h {
            seed(r + 1, c, &mut outside, &mut queue);
        }
        if c > 0 {
            seed(r, c - 1, &mut outside, &mut queue);
        }
        if c + 1 < w {
            seed(r, c + 1, &mut outside, &mut queue);
        }
    }
    let pixels = outside.iter().map(|&o| u8::from(!o)).collect();
    BinaryImage::from_raw_unchecked(w, h, pixels)
}
