//! File formats: ESRI ASCII grids, a baseline TIFF subset, scene metadata
//! and the LST text product.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::raster::{RasterError, RasterGrid};
use crate::scene::SceneError;

pub mod ascii;
pub(crate) mod kv;
pub mod lst_text;
pub mod metadata;
pub mod tiff;

pub use ascii::{read_ascii_grid, read_ascii_grid_with_header, write_ascii_grid, AsciiHeader};
pub use lst_text::{read_lst_text, write_lst_text};
pub use metadata::{parse_scene_metadata, read_scene_metadata, Product, SceneMetadata};
pub use tiff::{read_classified_tiff, read_tiff, write_classified_tiff, write_tiff, SampleType};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {key}: cannot parse '{value}' as a number")]
    InvalidNumber {
        line: usize,
        key: String,
        value: String,
    },
    #[error("line {line}: expected {expected} samples, found {found}")]
    ShortData {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("unsupported TIFF: {tag}: {detail}")]
    UnsupportedTiff { tag: &'static str, detail: String },
    #[error("malformed TIFF: {0}")]
    MalformedTiff(String),
    #[error("missing required key '{0}'")]
    MissingKey(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

impl FormatError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Reads a raster, choosing the format from the extension
/// (`.asc`/`.txt` → ASCII grid, `.tif`/`.tiff` → TIFF).
pub fn read_raster(path: impl AsRef<Path>) -> Result<RasterGrid, FormatError> {
    let path = path.as_ref();
    match extension(path).as_str() {
        "tif" | "tiff" => read_tiff(path),
        _ => read_ascii_grid(path),
    }
}

pub(crate) fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or_default()
        .to_ascii_lowercase()
}
