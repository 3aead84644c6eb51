//! Labeled glyph datasets stored as `<dir>/<label>/<file>` images.

use crate::io::{load_binary, LoadError};
use crate::raster::BinaryImage;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("{path}: no glyph images found")]
    Empty { path: PathBuf },
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let io = |source| DatasetError::Io { path: dir.to_owned(), source };
    let mut paths = std::fs::read_dir(dir)
        .map_err(io)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(io)?;
    paths.sort();
    Ok(paths)
}

/// Loads every image below `dir`, labeled by its sub-directory name.
/// Labels and files are visited in sorted order; hidden entries are skipped.
pub fn load_glyph_dataset(dir: &Path) -> Result<Vec<(String, BinaryImage)>, DatasetError> {
    let mut out = Vec::new();
    for sub in sorted_entries(dir)? {
        let Some(label) = sub.file_name().and_then(|n| n.to_str()).map(str::to_string) else {
            continue;
        };
        if label.starts_with('.') || !sub.is_dir() {
            continue;
        }
        for file in sorted_entries(&sub)? {
            let hidden = file.file_name().and_then(|n| n.to_str()).is_none_or(|n| n.starts_with('.'));
            if hidden || !file.is_file() {
                continue;
            }
            out.push((label.clone(), load_binary(&file)?));
        }
    }
    if out.is_empty() {
        return Err(DatasetError::Empty { path: dir.to_owned() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pnm::write_binary;

    #[test]
    fn loads_sorted_and_names_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        for (label, n) in [("B", 2), ("A", 3)] {
            std::fs::create_dir(dir.path().join(label)).unwrap();
            for i in 0..n {
                let g = BinaryImage::from_fn(4, 6, |r, c| (r + c + i) % 2 == 0).unwrap();
                write_binary(&dir.path().join(label).join(format!("{i}.pgm")), &g).unwrap();
            }
        }
        let ds = load_glyph_dataset(dir.path()).unwrap();
        let labels: Vec<&str> = ds.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(labels, ["A", "A", "A", "B", "B"]);

        std::fs::write(dir.path().join("B").join("junk.pgm"), b"not an image").unwrap();
        let err = load_glyph_dataset(dir.path()).unwrap_err().to_string();
        assert!(err.contains("junk.pgm"), "{err}");

        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(load_glyph_dataset(empty.path()), Err(DatasetError::Empty { .. })));
    }
}
