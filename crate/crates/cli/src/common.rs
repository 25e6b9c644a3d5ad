//! Shared loading helpers and the error-to-exit-code classification.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;

use iovpr::config::PipelineConfig;
use iovpr::embed::extract_features;
use iovpr::geo::GeoPoint;
use iovpr::manifest::{read_manifest, ManifestRecord};
use iovpr::mining::TrainQuery;
use iovpr::raster::RasterImage;
use iovpr::training::TrainGalleryItem;
use iovpr::ItemId;

use crate::args::{Cli, LayoutKindArg};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
    Internal(anyhow::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

pub type CliResult = Result<(), CliError>;

/// Effective pipeline config: file config (if any) with the CLI seed
/// override applied.
pub fn effective_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

pub fn layout_kind_override(config: &PipelineConfig, arg: Option<LayoutKindArg>) -> iovpr::LayoutKind {
    match arg {
        Some(LayoutKindArg::Real) => iovpr::LayoutKind::Real,
        Some(LayoutKindArg::Gray) => iovpr::LayoutKind::Gray,
        None => config.layout_kind,
    }
}

/// Loads manifest records plus their id->location map.
pub fn load_records(path: &Path) -> Result<(Vec<ManifestRecord>, BTreeMap<ItemId, GeoPoint>), CliError> {
    let records = read_manifest(path).with_context(|| format!("reading {}", path.display()))?;
    let mut locs = BTreeMap::new();
    for r in &records {
        locs.insert(r.id, r.location().expect("validated at load"));
    }
    Ok((records, locs))
}

/// Loads every gallery image and extracts its features (images are
/// dropped immediately, only features are kept).
pub fn load_gallery_features(path: &Path) -> Result<Vec<TrainGalleryItem>, CliError> {
    let (records, _) = load_records(path)?;
    let dir = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    let items: Result<Vec<TrainGalleryItem>, anyhow::Error> = records
        .par_iter()
        .map(|r| {
            let img = RasterImage::load_png(&r.resolved_image_path(&dir))
                .with_context(|| format!("gallery image for id {}", r.id))?;
            Ok(TrainGalleryItem {
                id: r.id,
                location: r.location().expect("validated at load"),
                features: extract_features(&img).with_context(|| format!("features for id {}", r.id))?,
            })
        })
        .collect();
    Ok(items?)
}

/// Loads query images into memory (desk-scale query sets).
pub fn load_query_images(path: &Path) -> Result<Vec<TrainQuery>, CliError> {
    let (records, _) = load_records(path)?;
    let dir = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    let queries: Result<Vec<TrainQuery>, anyhow::Error> = records
        .par_iter()
        .map(|r| {
            let image = RasterImage::load_png(&r.resolved_image_path(&dir))
                .with_context(|| format!("query image for id {}", r.id))?;
            Ok(TrainQuery {
                id: r.id,
                location: r.location().expect("validated at load"),
                image,
            })
        })
        .collect();
    Ok(queries?)
}

/// Loads a layout manifest and filters it at the threshold.
pub fn load_filtered_layouts(
    path: &Path,
    threshold: f64,
) -> Result<Vec<iovpr::LayoutRecord>, CliError> {
    let layouts = iovpr::manifest::load_layout_records(path)
        .with_context(|| format!("reading layouts {}", path.display()))?;
    let before = layouts.len();
    let kept = iovpr::augment::filter_layouts(layouts, threshold);
    log::info!(
        "layouts: {} of {before} above window proportion {threshold}",
        kept.len()
    );
    if kept.is_empty() {
        return Err(CliError::Data(anyhow::anyhow!(
            "no layouts left after filtering at > {threshold}"
        )));
    }
    Ok(kept)
}

/// Resolves a dataset input: explicit flag first, then the config's paths.
pub fn resolve_input(
    flag: Option<&PathBuf>,
    from_config: Option<&String>,
    what: &str,
) -> Result<PathBuf, CliError> {
    if let Some(p) = flag {
        return Ok(p.clone());
    }
    if let Some(p) = from_config {
        return Ok(PathBuf::from(p));
    }
    Err(CliError::usage(format!(
        "missing --{what} (and the config provides no {what} path)"
    )))
}

/// Requires that a path exists before handing it to a loader, so missing
/// artifacts score as data errors with a clear message.
pub fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if !path.is_file() {
        return Err(CliError::Data(anyhow::anyhow!(
            "{what} not found: {}",
            path.display()
        )));
    }
    Ok(())
}
