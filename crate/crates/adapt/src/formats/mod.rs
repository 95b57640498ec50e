//! On-disk formats: INS logs, SfM exports, PPS logs, mask and label PNGs,
//! JPEG thumbnails, color tables, triage ledgers and GeoJSON.

mod geojson;
mod images;
mod labels;
mod logs;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use geojson::{feature_collection, read_feature_collection, ExportedPolygon};
pub use images::{decode_jpeg_size, read_mask_png, read_rgb_png, thumbnail_jpeg, write_mask_png, write_rgb_png, THUMBNAIL_LONG_EDGE, THUMBNAIL_QUALITY};
pub use labels::{read_color_table, read_ledger, write_color_table, LedgerWriter};
pub use logs::{read_image_times, read_ins_csv, read_pps_csv, read_sfm_poses, write_image_times, write_ins_csv, write_pps_csv, write_sfm_poses};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("png: {0}")]
    Png(String),
    #[error("jpeg: {0}")]
    Jpeg(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FormatError {
    fn parse(line: u64, msg: impl Into<String>) -> Self {
        FormatError::Parse { line, msg: msg.into() }
    }
}

/// A format error tagged with the file it came from.
#[derive(Debug, Error)]
#[error("{}: {source}", path.display())]
pub struct FileError {
    pub path: PathBuf,
    #[source]
    pub source: FormatError,
}

impl FileError {
    /// IO failures (missing file, permissions) rather than bad contents.
    pub fn is_io(&self) -> bool {
        matches!(self.source, FormatError::Io(_))
    }
}

/// Runs `f` on an opened file, tagging errors with the path.
pub fn load<T>(path: &Path, f: impl FnOnce(std::fs::File) -> Result<T, FormatError>) -> Result<T, FileError> {
    let tag = |source| FileError { path: path.to_path_buf(), source };
    let file = std::fs::File::open(path).map_err(|e| tag(e.into()))?;
    f(file).map_err(tag)
}

/// Writes through a buffered file, tagging errors with the path.
pub fn save(path: &Path, f: impl FnOnce(&mut dyn std::io::Write) -> Result<(), FormatError>) -> Result<(), FileError> {
    let tag = |source| FileError { path: path.to_path_buf(), source };
    let file = std::fs::File::create(path).map_err(|e| tag(e.into()))?;
    let mut w = std::io::BufWriter::new(file);
    f(&mut w).map_err(tag)?;
    std::io::Write::flush(&mut w).map_err(|e| tag(e.into()))
}
