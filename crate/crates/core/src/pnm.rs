//! Binary PGM (P5) and PPM (P6) codecs, 8-bit only.
//!
//! Header tokens may be separated by any whitespace or `#` comments; exactly
//! one whitespace byte separates the maxval from the raster.

use crate::raster::{BinaryImage, ColorImage, GrayImage};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PnmError {
    #[error("not a binary PGM/PPM file (magic {0:?})")]
    BadMagic(String),
    #[error("truncated or malformed header: {0}")]
    Header(String),
    #[error("unsupported maxval {0}, only 255 is accepted")]
    MaxVal(u32),
    #[error("raster holds {actual} bytes, expected {expected}")]
    Truncated { expected: usize, actual: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pnm {
    Gray { width: usize, height: usize, data: Vec<u8> },
    Rgb { width: usize, height: usize, data: Vec<u8> },
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, PnmError> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PnmError::Header(format!("expected {what}")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Pnm, PnmError> {
    if bytes.len() < 2 {
        return Err(PnmError::BadMagic(String::from_utf8_lossy(bytes).into_owned()));
    }
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        other => return Err(PnmError::BadMagic(String::from_utf8_lossy(other).into_owned())),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PnmError::Header(format!("zero dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(PnmError::MaxVal(maxval));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(PnmError::Header("missing whitespace after maxval".into())),
    }
    let expected = width * height * channels;
    let data = &bytes[cur.pos..];
    if data.len() < expected {
        return Err(PnmError::Truncated {
            expected,
            actual: data.len(),
        });
    }
    let data = data[..expected].to_vec();
    Ok(if channels == 1 {
        Pnm::Gray { width, height, data }
    } else {
        Pnm::Rgb { width, height, data }
    })
}

pub fn encode_pgm(width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    assert_eq!(data.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

pub fn encode_ppm(width: usize, height: usize, rgb: &[[u8; 3]]) -> Vec<u8> {
    assert_eq!(rgb.len(), width * height);
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend(rgb.iter().flatten());
    out
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PnmError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(bytes)?;
    f.flush()?;
    Ok(())
}

pub fn write_gray(path: &Path, img: &GrayImage) -> Result<(), PnmError> {
    write_file(path, &encode_pgm(img.width(), img.height(), &img.to_u8()))
}

pub fn write_binary(path: &Path, img: &BinaryImage) -> Result<(), PnmError> {
    write_file(path, &encode_pgm(img.width(), img.height(), &img.to_u8()))
}

pub fn write_color(path: &Path, img: &ColorImage) -> Result<(), PnmError> {
    write_file(path, &encode_ppm(img.width(), img.height(), img.pixels()))
}
