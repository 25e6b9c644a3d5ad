//! Deterministic synthetic-city fixtures for tests, benchmarks, and demos.
//!
//! The city is a rectangular grid of gallery locations whose tile images are
//! a pure function of position: the image is a 16x16 grid of constant-color
//! cells, and each cell/channel value is a sinusoid of the local
//! east/north coordinates with a random direction and a wavelength long
//! enough that images vary smoothly around the positive radius and
//! decorrelate across the city. Every pixel therefore encodes the capture
//! location.
//!
//! Queries are placed a few meters from a gallery anchor and rendered from
//! their own location. Layouts are high-contrast random block textures with
//! a centered rectangular window covering a controlled proportion of the
//! frame, so composited queries look like indoor shots with the scene
//! visible through the window.

use std::path::Path;

use rayon::prelude::*;

use crate::augment::{composite, LayoutKind, LayoutMask, LayoutRecord};
use crate::embed::extract_features;
use crate::geo::{GeoPoint, EARTH_RADIUS_M};
use crate::manifest::{
    write_layout_manifest, write_manifest, LayoutManifestRecord, ManifestError, ManifestRecord,
    Role,
};
use crate::mining::TrainQuery;
use crate::raster::RasterImage;
use crate::rng::{stage_seed, SplitMix64};
use crate::training::TrainGalleryItem;
use crate::types::ItemId;

const METERS_PER_DEGREE: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

/// Image cell grid; 16x16 cells of 40x30 px in a 640x480 frame.
const CELL_GRID: usize = 16;

pub const IMAGE_WIDTH: usize = 640;
pub const IMAGE_HEIGHT: usize = 480;

/// Id blocks keeping gallery, train-query, and test-query ids disjoint.
const TRAIN_ID_BASE: u64 = 1_000_000;
const TEST_ID_BASE: u64 = 2_000_000;

#[derive(Clone, Debug)]
pub struct SyntheticCityConfig {
    pub seed: u64,
    /// Gallery grid: `grid_cols * grid_rows` items.
    pub grid_cols: usize,
    pub grid_rows: usize,
    pub grid_spacing_m: f64,
    pub train_queries: usize,
    pub test_queries: usize,
    pub layout_count: usize,
    /// Max distance between a query and its gallery anchor.
    pub query_offset_max_m: f64,
}

impl Default for SyntheticCityConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            grid_cols: 50,
            grid_rows: 40,
            grid_spacing_m: 20.0,
            train_queries: 300,
            test_queries: 100,
            layout_count: 60,
            query_offset_max_m: 8.0,
        }
    }
}

impl SyntheticCityConfig {
    /// Small city for fast end-to-end tests.
    pub fn mini(seed: u64) -> Self {
        Self {
            seed,
            grid_cols: 15,
            grid_rows: 10,
            grid_spacing_m: 20.0,
            train_queries: 40,
            test_queries: 15,
            layout_count: 20,
            query_offset_max_m: 8.0,
        }
    }

    pub fn gallery_size(&self) -> usize {
        self.grid_cols * self.grid_rows
    }
}

/// Per cell and channel: a sinusoid over local meters.
#[derive(Clone, Debug)]
struct CellWave {
    kx: f64,
    ky: f64,
    phase: f64,
}

#[derive(Clone, Debug)]
pub struct SyntheticCity {
    config: SyntheticCityConfig,
    origin: GeoPoint,
    waves: Vec<CellWave>,
    /// Query positions in local meters (east, north), with anchor index.
    train: Vec<(f64, f64)>,
    test: Vec<(f64, f64)>,
}

impl SyntheticCity {
    pub fn generate(config: SyntheticCityConfig) -> Self {
        let origin = GeoPoint::new(52.35, 4.88).expect("fixed origin is valid");

        let mut field_rng = SplitMix64::new(stage_seed(config.seed, "city-field"));
        let waves = (0..CELL_GRID * CELL_GRID * 3)
            .map(|_| {
                // Wavelengths 120..600 m (log-uniform): slow around the 10 m
                // positive radius, decorrelated across a few hundred meters.
                let lambda = 120.0 * (600.0f64 / 120.0).powf(field_rng.next_f64());
                let theta = field_rng.uniform(0.0, std::f64::consts::TAU);
                let k = std::f64::consts::TAU / lambda;
                CellWave {
                    kx: k * theta.cos(),
                    ky: k * theta.sin(),
                    phase: field_rng.uniform(0.0, std::f64::consts::TAU),
                }
            })
            .collect();

        let extent_x = (config.grid_cols - 1) as f64 * config.grid_spacing_m;
        let extent_y = (config.grid_rows - 1) as f64 * config.grid_spacing_m;
        let place = |rng: &mut SplitMix64, n: usize| -> Vec<(f64, f64)> {
            (0..n)
                .map(|_| {
                    let col = rng.below(config.grid_cols as u64) as f64;
                    let row = rng.below(config.grid_rows as u64) as f64;
                    let angle = rng.uniform(0.0, std::f64::consts::TAU);
                    let radius = config.query_offset_max_m * rng.next_f64().sqrt();
                    let x = (col * config.grid_spacing_m + radius * angle.cos())
                        .clamp(0.0, extent_x);
                    let y = (row * config.grid_spacing_m + radius * angle.sin())
                        .clamp(0.0, extent_y);
                    (x, y)
                })
                .collect()
        };
        let mut train_rng = SplitMix64::new(stage_seed(config.seed, "city-train-queries"));
        let train = place(&mut train_rng, config.train_queries);
        let mut test_rng = SplitMix64::new(stage_seed(config.seed, "city-test-queries"));
        let test = place(&mut test_rng, config.test_queries);

        Self { config, origin, waves, train, test }
    }

    pub fn config(&self) -> &SyntheticCityConfig {
        &self.config
    }

    fn to_geo(&self, x_east_m: f64, y_north_m: f64) -> GeoPoint {
        GeoPoint::new(
            self.origin.lat + y_north_m / METERS_PER_DEGREE,
            self.origin.lon + x_east_m / (METERS_PER_DEGREE * self.origin.lat.to_radians().cos()),
        )
        .expect("city stays in bounds")
    }

    pub fn gallery_id(&self, index: usize) -> ItemId {
        ItemId(index as u64)
    }

    pub fn train_query_id(&self, index: usize) -> ItemId {
        ItemId(TRAIN_ID_BASE + index as u64)
    }

    pub fn test_query_id(&self, index: usize) -> ItemId {
        ItemId(TEST_ID_BASE + index as u64)
    }

    fn gallery_xy(&self, index: usize) -> (f64, f64) {
        let col = index % self.config.grid_cols;
        let row = index / self.config.grid_cols;
        (
            col as f64 * self.config.grid_spacing_m,
            row as f64 * self.config.grid_spacing_m,
        )
    }

    pub fn gallery_location(&self, index: usize) -> GeoPoint {
        let (x, y) = self.gallery_xy(index);
        self.to_geo(x, y)
    }

    pub fn train_query_location(&self, index: usize) -> GeoPoint {
        let (x, y) = self.train[index];
        self.to_geo(x, y)
    }

    pub fn test_query_location(&self, index: usize) -> GeoPoint {
        let (x, y) = self.test[index];
        self.to_geo(x, y)
    }

    /// The scene at local position (x east, y north), as a 16x16 grid of
    /// constant cells.
    fn scene_at(&self, x: f64, y: f64) -> RasterImage {
        let mut img = RasterImage::new(IMAGE_WIDTH, IMAGE_HEIGHT);
        let cell_w = IMAGE_WIDTH / CELL_GRID;
        let cell_h = IMAGE_HEIGHT / CELL_GRID;
        for cr in 0..CELL_GRID {
            for cc in 0..CELL_GRID {
                let mut rgb = [0u8; 3];
                for (ch, v) in rgb.iter_mut().enumerate() {
                    let wave = &self.waves[(cr * CELL_GRID + cc) * 3 + ch];
                    let s = (wave.kx * x + wave.ky * y + wave.phase).sin();
                    *v = (127.5 + 100.0 * s).round().clamp(0.0, 255.0) as u8;
                }
                for r in cr * cell_h..(cr + 1) * cell_h {
                    for c in cc * cell_w..(cc + 1) * cell_w {
                        img.set_pixel(r, c, rgb);
                    }
                }
            }
        }
        img
    }

    pub fn gallery_image(&self, index: usize) -> RasterImage {
        let (x, y) = self.gallery_xy(index);
        self.scene_at(x, y)
    }

    pub fn train_query_image(&self, index: usize) -> RasterImage {
        let (x, y) = self.train[index];
        self.scene_at(x, y)
    }

    pub fn test_query_image(&self, index: usize) -> RasterImage {
        let (x, y) = self.test[index];
        self.scene_at(x, y)
    }

    /// Gallery features for training (images are generated and dropped).
    pub fn gallery_features(&self) -> Vec<TrainGalleryItem> {
        (0..self.config.gallery_size())
            .into_par_iter()
            .map(|i| TrainGalleryItem {
                id: self.gallery_id(i),
                location: self.gallery_location(i),
                features: extract_features(&self.gallery_image(i)).expect("non-empty image"),
            })
            .collect()
    }

    pub fn train_queries(&self) -> Vec<TrainQuery> {
        (0..self.config.train_queries)
            .map(|i| TrainQuery {
                id: self.train_query_id(i),
                location: self.train_query_location(i),
                image: self.train_query_image(i),
            })
            .collect()
    }

    /// Indoor layout set: random block textures with centered rectangular
    /// windows; target proportions span roughly 0.06..0.42 so the usual
    /// thresholds (>5%, >10%, >20%, >30%) all bite.
    pub fn layouts(&self) -> Vec<LayoutRecord> {
        let mut rng = SplitMix64::new(stage_seed(self.config.seed, "city-layouts"));
        (0..self.config.layout_count)
            .map(|i| {
                let proportion = rng.uniform(0.06, 0.42);
                let aspect = rng.uniform(1.0, 1.8);
                let mut w_frac = (proportion * aspect).sqrt().min(0.92);
                let mut h_frac = proportion / w_frac;
                if h_frac > 0.92 {
                    h_frac = 0.92;
                    w_frac = (proportion / h_frac).min(0.92);
                }
                let cx = 0.5 + rng.uniform(-0.05, 0.05);
                let cy = 0.5 + rng.uniform(-0.05, 0.05);
                let mask = rect_mask(IMAGE_WIDTH, IMAGE_HEIGHT, cx, cy, w_frac, h_frac);
                let image = block_texture(&mut rng, IMAGE_WIDTH, IMAGE_HEIGHT);
                LayoutRecord::new(format!("layout_{i:03}"), image, mask, LayoutKind::Real)
                    .expect("mask matches image")
            })
            .collect()
    }

    /// Composites the test queries with seeded layout draws from the given
    /// set, returning (query id, location, composited image, mask).
    pub fn composited_test_queries(
        &self,
        layouts: &[LayoutRecord],
    ) -> Vec<(ItemId, GeoPoint, RasterImage, LayoutMask)> {
        assert!(!layouts.is_empty(), "need at least one layout");
        let mut rng = SplitMix64::new(stage_seed(self.config.seed, "city-test-compositing"));
        (0..self.config.test_queries)
            .map(|i| {
                let layout = &layouts[rng.below(layouts.len() as u64) as usize];
                let image = composite(&self.test_query_image(i), &layout.mask, &layout.image)
                    .expect("fixture dimensions agree");
                (
                    self.test_query_id(i),
                    self.test_query_location(i),
                    image,
                    layout.mask.clone(),
                )
            })
            .collect()
    }
}

/// Axis-aligned rectangular window mask from fractional center and size.
fn rect_mask(width: usize, height: usize, cx: f64, cy: f64, w_frac: f64, h_frac: f64) -> LayoutMask {
    let w = (w_frac * width as f64).round() as i64;
    let h = (h_frac * height as f64).round() as i64;
    let x0 = ((cx * width as f64) as i64 - w / 2).clamp(0, width as i64 - 1);
    let y0 = ((cy * height as f64) as i64 - h / 2).clamp(0, height as i64 - 1);
    let x1 = (x0 + w).min(width as i64);
    let y1 = (y0 + h).min(height as i64);
    let mut bits = vec![0u8; width * height];
    for r in y0..y1 {
        for c in x0..x1 {
            bits[r as usize * width + c as usize] = 1;
        }
    }
    LayoutMask::from_bits(width, height, bits).expect("constructed in range")
}

/// High-contrast random checkerboard with per-block brightness jitter;
/// stands in for indoor clutter.
fn block_texture(rng: &mut SplitMix64, width: usize, height: usize) -> RasterImage {
    let block = [8usize, 16, 32][rng.below(3) as usize];
    let a = [rng.below(256) as u8, rng.below(256) as u8, rng.below(256) as u8];
    let b = [rng.below(256) as u8, rng.below(256) as u8, rng.below(256) as u8];
    let cols = width.div_ceil(block);
    let rows = height.div_ceil(block);
    let jitter: Vec<i16> = (0..rows * cols).map(|_| rng.below(121) as i16 - 60).collect();
    let mut img = RasterImage::new(width, height);
    for r in 0..height {
        for c in 0..width {
            let (br, bc) = (r / block, c / block);
            let base = if (br + bc) % 2 == 0 { a } else { b };
            let j = jitter[br * cols + bc];
            let px = [
                (base[0] as i16 + j).clamp(0, 255) as u8,
                (base[1] as i16 + j).clamp(0, 255) as u8,
                (base[2] as i16 + j).clamp(0, 255) as u8,
            ];
            img.set_pixel(r, c, px);
        }
    }
    img
}

/// Everything [`write_city_to_dir`] puts on disk.
#[derive(Clone, Debug)]
pub struct WrittenCity {
    pub gallery_manifest: std::path::PathBuf,
    pub train_queries_manifest: std::path::PathBuf,
    pub test_queries_manifest: std::path::PathBuf,
    pub layouts_manifest: std::path::PathBuf,
    pub masks_dir: std::path::PathBuf,
}

/// Materializes a city for CLI runs: gallery and train-query PNGs plus
/// manifests, layout images/masks plus manifest, and test queries written
/// pre-composited (they play the role of user indoor photos) with their
/// window masks under `masks/<query_id>.png` for the gray inference path.
pub fn write_city_to_dir(city: &SyntheticCity, dir: &Path) -> Result<WrittenCity, ManifestError> {
    let io_err = |p: &Path, source: std::io::Error| ManifestError::Io {
        path: p.display().to_string(),
        source,
    };
    for sub in ["gallery", "queries_train", "queries_test", "layouts", "masks"] {
        std::fs::create_dir_all(dir.join(sub)).map_err(|e| io_err(&dir.join(sub), e))?;
    }

    let year = 2019;
    let mut gallery_records = Vec::new();
    for i in 0..city.config.gallery_size() {
        let rel = format!("gallery/g{i:05}.png");
        city.gallery_image(i).save_png(&dir.join(&rel))?;
        let loc = city.gallery_location(i);
        gallery_records.push(ManifestRecord {
            id: city.gallery_id(i),
            image_path: rel,
            lat: loc.lat,
            lon: loc.lon,
            year,
            role: Role::Gallery,
            pano_id: None,
            yaw_index: None,
            pitch_index: None,
        });
    }
    let gallery_manifest = dir.join("gallery.jsonl");
    write_manifest(&gallery_manifest, &gallery_records)?;

    let mut train_records = Vec::new();
    for i in 0..city.config.train_queries {
        let rel = format!("queries_train/q{i:05}.png");
        city.train_query_image(i).save_png(&dir.join(&rel))?;
        let loc = city.train_query_location(i);
        train_records.push(ManifestRecord {
            id: city.train_query_id(i),
            image_path: rel,
            lat: loc.lat,
            lon: loc.lon,
            year,
            role: Role::Query,
            pano_id: None,
            yaw_index: None,
            pitch_index: None,
        });
    }
    let train_queries_manifest = dir.join("queries_train.jsonl");
    write_manifest(&train_queries_manifest, &train_records)?;

    let layouts = city.layouts();
    let mut layout_records = Vec::new();
    for layout in &layouts {
        let img_rel = format!("layouts/{}.png", layout.layout_id);
        let mask_rel = format!("layouts/{}_mask.png", layout.layout_id);
        layout.image.save_png(&dir.join(&img_rel))?;
        layout.mask.save_png(&dir.join(&mask_rel))?;
        layout_records.push(LayoutManifestRecord {
            layout_id: layout.layout_id.clone(),
            image_path: img_rel,
            mask_path: mask_rel,
            window_proportion: layout.window_proportion,
            kind: layout.kind,
        });
    }
    let layouts_manifest = dir.join("layouts.jsonl");
    write_layout_manifest(&layouts_manifest, &layout_records)?;

    let masks_dir = dir.join("masks");
    let mut test_records = Vec::new();
    for (id, loc, image, mask) in city.composited_test_queries(&layouts) {
        let rel = format!("queries_test/q{id}.png");
        image.save_png(&dir.join(&rel))?;
        mask.save_png(&masks_dir.join(format!("{id}.png")))?;
        test_records.push(ManifestRecord {
            id,
            image_path: rel,
            lat: loc.lat,
            lon: loc.lon,
            year: year + 1,
            role: Role::Query,
            pano_id: None,
            yaw_index: None,
            pitch_index: None,
        });
    }
    let test_queries_manifest = dir.join("queries_test.jsonl");
    write_manifest(&test_queries_manifest, &test_records)?;

    Ok(WrittenCity {
        gallery_manifest,
        train_queries_manifest,
        test_queries_manifest,
        layouts_manifest,
        masks_dir,
    })
}
