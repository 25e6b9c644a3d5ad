//! `pano-cut`: panoramas to perspective tiles plus a manifest.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::Value;

use iovpr::geo::GeoPoint;
use iovpr::manifest::{write_manifest, ManifestRecord, Role};
use iovpr::panorama::{panorama_to_tiles, tile_file_name, PanoramaRecord};
use iovpr::raster::RasterImage;
use iovpr::ItemId;

use crate::args::{Cli, PanoCutArgs};
use crate::common::{CliError, CliResult};

struct Sidecar {
    location: GeoPoint,
    year: i32,
}

fn read_sidecar(path: &Path) -> anyhow::Result<Sidecar> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading sidecar {}", path.display()))?;
    let v: Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing sidecar {}", path.display()))?;
    let num = |key: &str| -> anyhow::Result<f64> {
        v.get(key)
            .and_then(Value::as_f64)
            .ok_or_else(|| anyhow::anyhow!("sidecar {} missing numeric {key}", path.display()))
    };
    let location = GeoPoint::new(num("lat")?, num("lon")?)
        .with_context(|| format!("sidecar {}", path.display()))?;
    let year = num("year")? as i32;
    Ok(Sidecar { location, year })
}

/// Manifest image path: relative to the manifest's directory when the tile
/// lives under it, absolute otherwise.
fn manifest_image_path(tile_path: &Path, manifest_dir: &Path) -> String {
    match tile_path.strip_prefix(manifest_dir) {
        Ok(rel) => rel.to_string_lossy().into_owned(),
        Err(_) => tile_path.to_string_lossy().into_owned(),
    }
}

pub fn run(_cli: &Cli, args: &PanoCutArgs) -> CliResult {
    if !args.input.is_dir() {
        return Err(CliError::Data(anyhow::anyhow!(
            "input directory not found: {}",
            args.input.display()
        )));
    }
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let manifest_dir = args
        .manifest
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf();

    let mut pano_paths: Vec<PathBuf> = std::fs::read_dir(&args.input)
        .with_context(|| format!("listing {}", args.input.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "png"))
        .collect();
    pano_paths.sort();

    if pano_paths.is_empty() {
        log::warn!("no panoramas in {}; writing empty manifest", args.input.display());
        write_manifest(&args.manifest, &[]).context("writing manifest")?;
        return Ok(());
    }

    let mut records = Vec::new();
    let mut next_id = 0u64;
    let mut failures = 0usize;
    for pano_path in &pano_paths {
        let pano_id = pano_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let result = (|| -> anyhow::Result<Vec<ManifestRecord>> {
            let sidecar = read_sidecar(&pano_path.with_extension("json"))?;
            let image = RasterImage::load_png(pano_path)
                .with_context(|| format!("reading {}", pano_path.display()))?;
            let record = PanoramaRecord::new(image, sidecar.location, sidecar.year, pano_id.clone())
                .with_context(|| format!("panorama {pano_id}"))?;
            let tiles = panorama_to_tiles(&record).context("projecting")?;
            let mut rows = Vec::with_capacity(tiles.len());
            for tile in tiles {
                let name = tile_file_name(&tile.pano_id, tile.pitch_index, tile.yaw_index);
                let tile_path = args.out.join(&name);
                tile.image
                    .save_png(&tile_path)
                    .with_context(|| format!("writing {}", tile_path.display()))?;
                rows.push(ManifestRecord {
                    id: ItemId(next_id + (tile.pitch_index as u64 * 12 + tile.yaw_index as u64)),
                    image_path: manifest_image_path(&tile_path, &manifest_dir),
                    lat: tile.location.lat,
                    lon: tile.location.lon,
                    year: sidecar.year,
                    role: Role::Gallery,
                    pano_id: Some(tile.pano_id.clone()),
                    yaw_index: Some(tile.yaw_index),
                    pitch_index: Some(tile.pitch_index),
                });
            }
            Ok(rows)
        })();
        match result {
            Ok(rows) => {
                next_id += rows.len() as u64;
                records.extend(rows);
            }
            Err(e) => {
                log::error!("skipping panorama {pano_id}: {e:#}");
                failures += 1;
            }
        }
    }

    if records.is_empty() && failures > 0 {
        return Err(CliError::Data(anyhow::anyhow!(
            "all {failures} panoramas failed"
        )));
    }
    write_manifest(&args.manifest, &records).context("writing manifest")?;
    log::info!(
        "wrote {} tiles from {} panoramas ({failures} skipped)",
        records.len(),
        pano_paths.len() - failures
    );
    Ok(())
}
