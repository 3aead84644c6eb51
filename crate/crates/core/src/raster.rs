//! Row-major pixel containers for the three pipeline stages: color input,
//! normalized grayscale and binary masks.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RasterError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("pixel buffer holds {actual} values, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("gray intensity {value} at index {index} is outside [0, 1]")]
    IntensityOutOfRange { index: usize, value: f64 },
    #[error("binary pixel {value} at index {index} is neither 0 nor 1")]
    NotBinary { index: usize, value: u8 },
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<(), RasterError> {
    if width == 0 || height == 0 {
        return Err(RasterError::EmptyDimensions { width, height });
    }
    if len != width * height {
        return Err(RasterError::LengthMismatch {
            expected: width * height,
            actual: len,
        });
    }
    Ok(())
}

/// Inclusive pixel rectangle `(row0, col0)..=(row1, col1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub row0: usize,
    pub col0: usize,
    pub row1: usize,
    pub col1: usize,
}

impl Rect {
    pub fn new(row0: usize, col0: usize, row1: usize, col1: usize) -> Self {
        debug_assert!(row0 <= row1 && col0 <= col1);
        Rect {
            row0,
            col0,
            row1,
            col1,
        }
    }

    pub fn width(&self) -> usize {
        self.col1 - self.col0 + 1
    }

    pub fn height(&self) -> usize {
        self.row1 - self.row0 + 1
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row0..=self.row1).contains(&row) && (self.col0..=self.col1).contains(&col)
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.row1 < height && self.col1 < width
    }

    /// Grow by `margin` on every side, clipped to a `width` x `height` frame.
    pub fn expand(&self, margin: usize, width: usize, height: usize) -> Rect {
        Rect {
            row0: self.row0.saturating_sub(margin),
            col0: self.col0.saturating_sub(margin),
            row1: (self.row1 + margin).min(height - 1),
            col1: (self.col1 + margin).min(width - 1),
        }
    }

    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let row0 = self.row0.max(other.row0);
        let col0 = self.col0.max(other.col0);
        let row1 = self.row1.min(other.row1);
        let col1 = self.col1.min(other.col1);
        (row0 <= row1 && col0 <= col1).then_some(Rect {
            row0,
            col0,
            row1,
            col1,
        })
    }

    /// Intersection over union, counting pixels.
    pub fn iou(&self, other: &Rect) -> f64 {
        let inter = self.intersection(other).map_or(0, |r| r.area());
        let union = self.area() + other.area() - inter;
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self, RasterError> {
        check_dims(width, height, pixels.len())?;
        Ok(ColorImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self, RasterError> {
        Self::new(width, height, vec![rgb; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self, RasterError> {
        let mut pixels = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> [u8; 3] {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        self.pixels[row * self.width + col] = rgb;
    }

    pub fn crop(&self, rect: Rect) -> ColorImage {
        assert!(rect.fits_in(self.width, self.height), "crop out of bounds");
        let pixels = (rect.row0..=rect.row1)
            .flat_map(|r| self.pixels[r * self.width + rect.col0..=r * self.width + rect.col1].iter().copied())
            .collect();
        ColorImage {
            width: rect.width(),
            height: rect.height(),
            pixels,
        }
    }
}

/// Grayscale raster with intensities normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, RasterError> {
        check_dims(width, height, pixels.len())?;
        if let Some((index, &value)) = pixels
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(RasterError::IntensityOutOfRange { index, value });
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image from values that are clamped into `[0, 1]`; NaN maps to 0.
    pub fn from_clamped(width: usize, height: usize, mut pixels: Vec<f64>) -> Result<Self, RasterError> {
        for v in &mut pixels {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self::new(width, height, pixels)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self, RasterError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, RasterError> {
        let mut pixels = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn crop(&self, rect: Rect) -> GrayImage {
        assert!(rect.fits_in(self.width, self.height), "crop out of bounds");
        let pixels = (rect.row0..=rect.row1)
            .flat_map(|r| self.pixels[r * self.width + rect.col0..=r * self.width + rect.col1].iter().copied())
            .collect();
        GrayImage {
            width: rect.width(),
            height: rect.height(),
            pixels,
        }
    }

    /// Median intensity; the mean of the two middle values for even counts.
    pub fn median(&self) -> f64 {
        let mut sorted = self.pixels.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        }
    }

    /// Quantizes to 8 bits for PGM output.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels.iter().map(|v| (v * 255.0).round() as u8).collect()
    }
}

/// Binary raster; every pixel is exactly 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, RasterError> {
        check_dims(width, height, pixels.len())?;
        if let Some((index, &value)) = pixels.iter().enumerate().find(|(_, v)| **v > 1) {
            return Err(RasterError::NotBinary { index, value });
        }
        Ok(BinaryImage {
            width,
            height,
            pixels,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self, RasterError> {
        Self::new(width, height, vec![0; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self, RasterError> {
        let mut pixels = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                pixels.push(u8::from(f(r, c)));
            }
        }
        Self::new(width, height, pixels)
    }

    /// Parses rows of `0`/`1` characters (other characters are ignored), for tests and fixtures.
    pub fn from_rows(rows: &[&str]) -> Result<Self, RasterError> {
        let grid: Vec<Vec<u8>> = rows
            .iter()
            .map(|row| {
                row.chars()
                    .filter_map(|ch| match ch {
                        '0' | '.' => Some(0),
                        '1' | '#' => Some(1),
                        _ => None,
                    })
                    .collect()
            })
            .collect();
        let height = grid.len();
        let width = grid.first().map_or(0, Vec::len);
        if let Some(bad) = grid.iter().find(|r| r.len() != width) {
            return Err(RasterError::LengthMismatch {
                expected: width,
                actual: bad.len(),
            });
        }
        Self::new(width, height, grid.concat())
    }

    pub(crate) fn from_raw_unchecked(width: usize, height: usize, pixels: Vec<u8>) -> Self {
        debug_assert_eq!(pixels.len(), width * height);
        debug_assert!(pixels.iter().all(|&v| v <= 1));
        BinaryImage {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn is_set(&self, row: usize, col: usize) -> bool {
        self.pixels[row * self.width + col] == 1
    }

    /// Pixel value with out-of-frame positions reading as `outside`.
    #[inline]
    pub fn get_or(&self, row: isize, col: isize, outside: u8) -> u8 {
        if row < 0 || col < 0 || row >= self.height as isize || col >= self.width as isize {
            outside
        } else {
            self.pixels[row as usize * self.width + col as usize]
        }
    }

    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        self.pixels[row * self.width + col] = u8::from(on);
    }

    pub fn count_ones(&self) -> usize {
        self.pixels.iter().filter(|&&v| v == 1).count()
    }

    pub fn complement(&self) -> BinaryImage {
        BinaryImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|v| 1 - v).collect(),
        }
    }

    pub fn crop(&self, rect: Rect) -> BinaryImage {
        assert!(rect.fits_in(self.width, self.height), "crop out of bounds");
        let pixels = (rect.row0..=rect.row1)
            .flat_map(|r| self.pixels[r * self.width + rect.col0..=r * self.width + rect.col1].iter().copied())
            .collect();
        BinaryImage {
            width: rect.width(),
            height: rect.height(),
            pixels,
        }
    }

    /// Tight bounding box of the set pixels, if any.
    pub fn bounding_box(&self) -> Option<Rect> {
        let mut bbox: Option<Rect> = None;
        for r in 0..self.height {
            for c in 0..self.width {
                if self.pixels[r * self.width + c] == 1 {
                    bbox = Some(match bbox {
                        None => Rect::new(r, c, r, c),
                        Some(b) => Rect {
                            row0: b.row0.min(r),
                            col0: b.col0.min(c),
                            row1: b.row1.max(r),
                            col1: b.col1.max(c),
                        },
                    });
                }
            }
        }
        bbox
    }

    /// Maps 1 to white and 0 to black, for PGM dumps.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels.iter().map(|&v| v * 255).collect()
    }
}
