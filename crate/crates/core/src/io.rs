//! Image file loading: PNG through the `image` crate, PGM/PPM through [`crate::pnm`].

use crate::pnm::{self, Pnm, PnmError};
use crate::raster::{BinaryImage, ColorImage, RasterError};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Pnm { path: PathBuf, source: PnmError },
    #[error("{path}: {source}")]
    Png { path: PathBuf, source: image::ImageError },
    #[error("{path}: unsupported image format (expected PNG, PGM or PPM)")]
    Unsupported { path: PathBuf },
    #[error("{path}: {source}")]
    Raster { path: PathBuf, source: RasterError },
}

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

pub fn decode_color(bytes: &[u8], path: &Path) -> Result<ColorImage, LoadError> {
    let raster_err = |source| LoadError::Raster { path: path.to_owned(), source };
    if bytes.starts_with(PNG_SIGNATURE) {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
            .map_err(|source| LoadError::Png { path: path.to_owned(), source })?
            .to_rgb8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let pixels = img.pixels().map(|p| p.0).collect();
        return ColorImage::new(w, h, pixels).map_err(raster_err);
    }
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        let decoded = pnm::decode(bytes).map_err(|source| LoadError::Pnm { path: path.to_owned(), source })?;
        return match decoded {
            Pnm::Gray { width, height, data } => {
                ColorImage::new(width, height, data.into_iter().map(|v| [v, v, v]).collect()).map_err(raster_err)
            }
            Pnm::Rgb { width, height, data } => {
                ColorImage::new(width, height, data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
                    .map_err(raster_err)
            }
        };
    }
    Err(LoadError::Unsupported { path: path.to_owned() })
}

pub fn load_color(path: &Path) -> Result<ColorImage, LoadError> {
    let bytes = std::fs::read(path).map_err(|source| LoadError::Read { path: path.to_owned(), source })?;
    decode_color(&bytes, path)
}

/// Loads a glyph image; pixels brighter than mid-gray are foreground.
pub fn load_binary(path: &Path) -> Result<BinaryImage, LoadError> {
    let color = load_color(path)?;
    let pixels = color
        .pixels()
        .iter()
        .map(|&p| u8::from(crate::preprocess::luma(p) > 0.5))
        .collect();
    BinaryImage::new(color.width(), color.height(), pixels)
        .map_err(|source| LoadError::Raster { path: path.to_owned(), source })
}

/// Writes a PNG; used for debug artifacts where a viewer-friendly format helps.
pub fn save_png(path: &Path, img: &ColorImage) -> Result<(), image::ImageError> {
    let buf: Vec<u8> = img.pixels().iter().flatten().copied().collect();
    image::save_buffer_with_format(
        path,
        &buf,
        img.width() as u32,
        img.height() as u32,
        image::ExtendedColorType::Rgb8,
        image::ImageFormat::Png,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_and_ppm_decode_to_the_same_pixels() {
        let img = ColorImage::from_fn(5, 3, |r, c| [(r * 40) as u8, (c * 50) as u8, 7]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let png = dir.path().join("a.png");
        let ppm = dir.path().join("a.ppm");
        save_png(&png, &img).unwrap();
        pnm::write_color(&ppm, &img).unwrap();
        assert_eq!(load_color(&png).unwrap(), img);
        assert_eq!(load_color(&ppm).unwrap(), img);
    }

    #[test]
    fn unknown_format_is_rejected() {
        let err = decode_color(b"GIF89a....", Path::new("x.gif")).unwrap_err();
        assert!(matches!(err, LoadError::Unsupported { .. }));
        assert!(err.to_string().contains("x.gif"));
    }

    #[test]
    fn glyph_pgm_loads_as_binary() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.pgm");
        let b = BinaryImage::from_rows(&["#.", ".#"]).unwrap();
        pnm::write_binary(&p, &b).unwrap();
        assert_eq!(load_binary(&p).unwrap(), b);
    }
}
