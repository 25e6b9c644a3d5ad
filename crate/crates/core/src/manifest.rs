//! Dataset manifests: JSON-Lines records binding image files to ids, WGS84
//! locations, and capture metadata.
//!
//! Image paths are stored as written and resolved relative to the manifest
//! file's directory when relative. Loading validates id uniqueness,
//! coordinate ranges, and (for image manifests) that every referenced file
//! exists.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{LayoutKind, LayoutMask, LayoutRecord};
use crate::geo::GeoPoint;
use crate::raster::RasterImage;
use crate::types::ItemId;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad record at {path}:{line}: {source}")]
    BadRecord {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
    #[error("duplicate id {id} at {path}:{line}")]
    DuplicateId {
        id: String,
        path: String,
        line: usize,
    },
    #[error("invalid coordinate at {path}:{line}: {source}")]
    BadCoordinate {
        path: String,
        line: usize,
        source: crate::geo::GeoError,
    },
    #[error("referenced file {referenced} does not exist ({path}:{line})")]
    MissingFile {
        referenced: String,
        path: String,
        line: usize,
    },
    #[error(transparent)]
    Raster(#[from] crate::raster::RasterError),
    #[error(transparent)]
    Augment(#[from] crate::augment::AugmentError),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Role {
    Query,
    Gallery,
}

/// One image of the dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: ItemId,
    pub image_path: String,
    pub lat: f64,
    pub lon: f64,
    pub year: i32,
    pub role: Role,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pano_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub yaw_index: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pitch_index: Option<u8>,
}

impl ManifestRecord {
    pub fn location(&self) -> Result<GeoPoint, crate::geo::GeoError> {
        GeoPoint::new(self.lat, self.lon)
    }

    /// Image path resolved against the manifest's directory.
    pub fn resolved_image_path(&self, manifest_dir: &Path) -> PathBuf {
        let p = Path::new(&self.image_path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            manifest_dir.join(p)
        }
    }
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf()
}

/// Reads a manifest, validating ids, coordinates, and file existence.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>, ManifestError> {
    let io_err = |source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = manifest_dir(path);
    let f = BufReader::new(std::fs::File::open(path).map_err(io_err)?);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ManifestRecord =
            serde_json::from_str(&line).map_err(|source| ManifestError::BadRecord {
                path: path.display().to_string(),
                line: i + 1,
                source,
            })?;
        if !seen.insert(record.id) {
            return Err(ManifestError::DuplicateId {
                id: record.id.to_string(),
                path: path.display().to_string(),
                line: i + 1,
            });
        }
        record.location().map_err(|source| ManifestError::BadCoordinate {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?;
        let img = record.resolved_image_path(&dir);
        if !img.is_file() {
            return Err(ManifestError::MissingFile {
                referenced: img.display().to_string(),
                path: path.display().to_string(),
                line: i + 1,
            });
        }
        out.push(record);
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<(), ManifestError> {
    let io_err = |source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    for r in records {
        serde_json::to_writer(&mut f, r).map_err(|e| ManifestError::Io {
            path: path.display().to_string(),
            source: e.into(),
        })?;
        f.write_all(b"\n").map_err(io_err)?;
    }
    f.flush().map_err(io_err)
}

/// One layout of the augmentation set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutManifestRecord {
    pub layout_id: String,
    pub image_path: String,
    pub mask_path: String,
    pub window_proportion: f64,
    pub kind: LayoutKind,
}

pub fn read_layout_manifest(path: &Path) -> Result<Vec<LayoutManifestRecord>, ManifestError> {
    let io_err = |source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    };
    let f = BufReader::new(std::fs::File::open(path).map_err(io_err)?);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LayoutManifestRecord =
            serde_json::from_str(&line).map_err(|source| ManifestError::BadRecord {
                path: path.display().to_string(),
                line: i + 1,
                source,
            })?;
        if !seen.insert(record.layout_id.clone()) {
            return Err(ManifestError::DuplicateId {
                id: record.layout_id.clone(),
                path: path.display().to_string(),
                line: i + 1,
            });
        }
        out.push(record);
    }
    Ok(out)
}

pub fn write_layout_manifest(
    path: &Path,
    records: &[LayoutManifestRecord],
) -> Result<(), ManifestError> {
    let io_err = |source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    for r in records {
        serde_json::to_writer(&mut f, r).map_err(|e| ManifestError::Io {
            path: path.display().to_string(),
            source: e.into(),
        })?;
        f.write_all(b"\n").map_err(io_err)?;
    }
    f.flush().map_err(io_err)
}

/// Loads the layout images and masks behind a layout manifest, resizing
/// each to the pipeline's 480x640 layout size (bilinear image,
/// nearest-neighbor mask). The window proportion is recomputed from the
/// mask; a manifest value drifting more than 1e-6 from the recount is
/// reported in the log.
pub fn load_layout_records(path: &Path) -> Result<Vec<LayoutRecord>, ManifestError> {
    use crate::augment::{resize_layout, LAYOUT_HEIGHT, LAYOUT_WIDTH};
    let dir = manifest_dir(path);
    let mut out = Vec::new();
    for record in read_layout_manifest(path)? {
        let resolve = |p: &str| -> PathBuf {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                dir.join(p)
            }
        };
        let image = RasterImage::load_png(&resolve(&record.image_path))?;
        let mask = LayoutMask::load_png(&resolve(&record.mask_path))?;
        let loaded = LayoutRecord::new(record.layout_id.clone(), image, mask, record.kind)?;
        if (loaded.window_proportion - record.window_proportion).abs() > 1e-6 {
            log::warn!(
                "layout {}: manifest proportion {} != recount {}",
                record.layout_id,
                record.window_proportion,
                loaded.window_proportion
            );
        }
        let layout = resize_layout(&loaded, LAYOUT_WIDTH, LAYOUT_HEIGHT)?;
        if layout.image.width() != loaded.image.width()
            || layout.image.height() != loaded.image.height()
        {
            log::debug!(
                "layout {}: resized {}x{} to {LAYOUT_WIDTH}x{LAYOUT_HEIGHT}",
                record.layout_id,
                loaded.image.width(),
                loaded.image.height()
            );
        }
        out.push(layout);
    }
    Ok(out)
}
