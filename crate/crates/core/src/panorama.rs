//! Equirectangular panorama to perspective-tile conversion.
//!
//! A 2000x4000 street-view panorama is gnomonically projected onto six
//! 960x960 cube faces (90 deg FOV each). The four lateral faces are
//! concatenated front, right, back, left into a continuous 360 deg strip,
//! the bottom 240 rows (vehicle) are cropped away, and the resulting
//! 720x3840 strip is cut into 24 overlapping 480x640 tiles: two pitch rows
//! starting at y = 0 and 240, twelve yaw columns starting at x = 320*k with
//! horizontal wraparound for the last tile.
//!
//! Conventions (fixed, all downstream geometry is relative to them):
//! - yaw 0 (the front-face axis) maps to the panorama column center
//!   `(W-1)/2`; yaw grows to the right and wraps at +-180 deg,
//! - pitch 0 maps to the row center `(H-1)/2`; pitch +90 deg is up (row 0),
//! - sampling is bilinear with horizontal wraparound and vertical clamp.

use rayon::prelude::*;
use thiserror::Error;

use crate::geo::GeoPoint;
use crate::raster::RasterImage;

pub const PANO_HEIGHT: usize = 2000;
pub const PANO_WIDTH: usize = 4000;
pub const FACE_SIZE: usize = 960;
pub const STRIP_HEIGHT: usize = 720;
pub const STRIP_WIDTH: usize = 3840;
pub const STRIP_CROP_ROWS: usize = 240;
pub const TILE_HEIGHT: usize = 480;
pub const TILE_WIDTH: usize = 640;
pub const TILE_COLUMN_STRIDE: usize = 320;
pub const YAW_STEPS: usize = 12;
pub const PITCH_STEPS: usize = 2;
pub const TILES_PER_PANORAMA: usize = YAW_STEPS * PITCH_STEPS;

#[derive(Debug, Error)]
pub enum PanoramaError {
    #[error("panorama must be {PANO_HEIGHT}x{PANO_WIDTH}, got {height}x{width}")]
    BadPanoramaDimensions { height: usize, width: usize },
    #[error("face must be {FACE_SIZE}x{FACE_SIZE}, got {height}x{width}")]
    BadFaceDimensions { height: usize, width: usize },
    #[error("strip must be {STRIP_HEIGHT}x{STRIP_WIDTH}, got {height}x{width}")]
    BadStripDimensions { height: usize, width: usize },
}

/// Cube face identifiers; the lateral stitch order is the enum order of the
/// first four.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Face {
    Front,
    Right,
    Back,
    Left,
    Top,
    Bottom,
}

impl Face {
    pub const ALL: [Face; 6] = [Face::Front, Face::Right, Face::Back, Face::Left, Face::Top, Face::Bottom];
    pub const LATERAL: [Face; 4] = [Face::Front, Face::Right, Face::Back, Face::Left];

    /// (forward, right, image-down) unit vectors in world coordinates
    /// (y up, z forward at yaw 0, x at yaw +90 deg).
    fn basis(self) -> ([f64; 3], [f64; 3], [f64; 3]) {
        match self {
            Face::Front => ([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, -1.0, 0.0]),
            Face::Right => ([1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, -1.0, 0.0]),
            Face::Back => ([0.0, 0.0, -1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]),
            Face::Left => ([-1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]),
            Face::Top => ([0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
            Face::Bottom => ([0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]),
        }
    }
}

/// A 2000x4000 panorama with its capture metadata.
#[derive(Clone, Debug)]
pub struct PanoramaRecord {
    pub image: RasterImage,
    pub location: GeoPoint,
    pub capture_year: i32,
    pub pano_id: String,
}

impl PanoramaRecord {
    pub fn new(
        image: RasterImage,
        location: GeoPoint,
        capture_year: i32,
        pano_id: String,
    ) -> Result<Self, PanoramaError> {
        if image.height() != PANO_HEIGHT || image.width() != PANO_WIDTH {
            return Err(PanoramaError::BadPanoramaDimensions {
                height: image.height(),
                width: image.width(),
            });
        }
        Ok(Self { image, location, capture_year, pano_id })
    }
}

/// The six projected faces of one panorama.
#[derive(Clone, Debug)]
pub struct CubeFaces {
    faces: [RasterImage; 6],
}

impl CubeFaces {
    pub fn get(&self, face: Face) -> &RasterImage {
        &self.faces[face as usize]
    }
}

/// One 480x640 perspective tile cut from a panorama strip.
#[derive(Clone, Debug)]
pub struct PerspectiveTile {
    pub image: RasterImage,
    pub pano_id: String,
    pub yaw_index: u8,
    pub pitch_index: u8,
    pub location: GeoPoint,
}

/// File name scheme for exported tiles.
pub fn tile_file_name(pano_id: &str, pitch_index: u8, yaw_index: u8) -> String {
    format!("{pano_id}_p{pitch_index}_y{yaw_index}.png")
}

/// View direction through face pixel (row, col); fractional coordinates are
/// allowed. 90 deg FOV: the focal length equals half the face size.
pub fn face_direction(face: Face, row: f64, col: f64, size: usize) -> [f64; 3] {
    let (fwd, right, down) = face.basis();
    let center = (size as f64 - 1.0) / 2.0;
    let focal = size as f64 / 2.0;
    let u = (col - center) / focal;
    let v = (row - center) / focal;
    let d = [
        fwd[0] + u * right[0] + v * down[0],
        fwd[1] + u * right[1] + v * down[1],
        fwd[2] + u * right[2] + v * down[2],
    ];
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    [d[0] / n, d[1] / n, d[2] / n]
}

/// Fractional (row, col) in an equirectangular image for a unit direction.
pub fn direction_to_equirect(dir: [f64; 3], width: usize, height: usize) -> (f64, f64) {
    let yaw = dir[0].atan2(dir[2]);
    let pitch = dir[1].clamp(-1.0, 1.0).asin();
    let col = (width as f64 - 1.0) / 2.0 + yaw * width as f64 / (2.0 * std::f64::consts::PI);
    let row = (height as f64 - 1.0) / 2.0 - pitch * height as f64 / std::f64::consts::PI;
    (row, col)
}

/// Bilinear sample with horizontal wraparound and vertical clamp.
fn sample_equirect(img: &RasterImage, row: f64, col: f64) -> [u8; 3] {
    let w = img.width();
    let h = img.height();
    let col = col.rem_euclid(w as f64);
    let row = row.clamp(0.0, (h - 1) as f64);
    let c0 = col.floor() as usize % w;
    let c1 = (c0 + 1) % w;
    let wx = col - col.floor();
    let r0 = row.floor() as usize;
    let r1 = (r0 + 1).min(h - 1);
    let wy = row - r0 as f64;
    let mut out = [0u8; 3];
    for (ch, o) in out.iter_mut().enumerate() {
        let p00 = img.pixel(r0, c0)[ch] as f64;
        let p01 = img.pixel(r0, c1)[ch] as f64;
        let p10 = img.pixel(r1, c0)[ch] as f64;
        let p11 = img.pixel(r1, c1)[ch] as f64;
        let top = p00 + (p01 - p00) * wx;
        let bot = p10 + (p11 - p10) * wx;
        *o = (top + (bot - top) * wy).round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Gnomonic projection of an equirectangular image onto one cube face.
///
/// The hot loop is equivalent to [`face_direction`] followed by
/// [`direction_to_equirect`], with the normalization folded into the pitch
/// computation (`asin(y/|d|) = atan2(y, sqrt(x^2 + z^2))`).
pub fn project_face(pano: &RasterImage, face: Face, size: usize) -> RasterImage {
    let (fwd, right, down) = face.basis();
    let center = (size as f64 - 1.0) / 2.0;
    let focal = size as f64 / 2.0;
    let us: Vec<f64> = (0..size).map(|c| (c as f64 - center) / focal).collect();
    let pano_w = pano.width() as f64;
    let pano_h = pano.height() as f64;
    let col_center = (pano_w - 1.0) / 2.0;
    let row_center = (pano_h - 1.0) / 2.0;
    let col_scale = pano_w / (2.0 * std::f64::consts::PI);
    let row_scale = pano_h / std::f64::consts::PI;

    let mut out = RasterImage::new(size, size);
    let width = out.width();
    out.data_mut()
        .par_chunks_mut(width * crate::raster::CHANNELS)
        .enumerate()
        .for_each(|(r, row_buf)| {
            let v = (r as f64 - center) / focal;
            let base = [
                fwd[0] + v * down[0],
                fwd[1] + v * down[1],
                fwd[2] + v * down[2],
            ];
            for (c, &u) in us.iter().enumerate() {
                let x = base[0] + u * right[0];
                let y = base[1] + u * right[1];
                let z = base[2] + u * right[2];
                let yaw = x.atan2(z);
                let pitch = y.atan2((x * x + z * z).sqrt());
                let col = col_center + yaw * col_scale;
                let row = row_center - pitch * row_scale;
                let rgb = sample_equirect(pano, row, col);
                row_buf[c * 3..c * 3 + 3].copy_from_slice(&rgb);
            }
        });
    out
}

/// Projects a panorama into its six 960x960 faces. Top and bottom are
/// produced too (they are discarded downstream but keep the routine general).
pub fn project_to_faces(pano: &PanoramaRecord) -> Result<CubeFaces, PanoramaError> {
    if pano.image.height() != PANO_HEIGHT || pano.image.width() != PANO_WIDTH {
        return Err(PanoramaError::BadPanoramaDimensions {
            height: pano.image.height(),
            width: pano.image.width(),
        });
    }
    let faces: Vec<RasterImage> = Face::ALL
        .par_iter()
        .map(|&f| project_face(&pano.image, f, FACE_SIZE))
        .collect();
    Ok(CubeFaces { faces: faces.try_into().expect("six faces") })
}

/// Concatenates the lateral faces front, right, back, left into a 360 deg
/// strip and removes the bottom 240 rows.
pub fn stitch_and_crop(faces: &CubeFaces) -> Result<RasterImage, PanoramaError> {
    for face in Face::LATERAL {
        let img = faces.get(face);
        if img.height() != FACE_SIZE || img.width() != FACE_SIZE {
            return Err(PanoramaError::BadFaceDimensions {
                height: img.height(),
                width: img.width(),
            });
        }
    }
    let mut strip = RasterImage::new(STRIP_WIDTH, STRIP_HEIGHT);
    let row_bytes = FACE_SIZE * crate::raster::CHANNELS;
    for (k, face) in Face::LATERAL.iter().enumerate() {
        let img = faces.get(*face);
        for r in 0..STRIP_HEIGHT {
            let dst = (r * STRIP_WIDTH + k * FACE_SIZE) * crate::raster::CHANNELS;
            let src = r * row_bytes;
            strip.data_mut()[dst..dst + row_bytes]
                .copy_from_slice(&img.data()[src..src + row_bytes]);
        }
    }
    Ok(strip)
}

/// Cuts the 720x3840 strip into 24 overlapping 480x640 tiles.
pub fn cut_tiles(
    strip: &RasterImage,
    pano_id: &str,
    location: GeoPoint,
) -> Result<Vec<PerspectiveTile>, PanoramaError> {
    if strip.height() != STRIP_HEIGHT || strip.width() != STRIP_WIDTH {
        return Err(PanoramaError::BadStripDimensions {
            height: strip.height(),
            width: strip.width(),
        });
    }
    const CH: usize = crate::raster::CHANNELS;
    let mut tiles = Vec::with_capacity(TILES_PER_PANORAMA);
    for pitch_index in 0..PITCH_STEPS {
        let y0 = pitch_index * (STRIP_HEIGHT - TILE_HEIGHT);
        for yaw_index in 0..YAW_STEPS {
            let x0 = yaw_index * TILE_COLUMN_STRIDE;
            let mut image = RasterImage::new(TILE_WIDTH, TILE_HEIGHT);
            // Rows are contiguous except where the last tile wraps.
            let first = TILE_WIDTH.min(STRIP_WIDTH - x0);
            for r in 0..TILE_HEIGHT {
                let src = ((y0 + r) * STRIP_WIDTH + x0) * CH;
                let dst = r * TILE_WIDTH * CH;
                image.data_mut()[dst..dst + first * CH]
                    .copy_from_slice(&strip.data()[src..src + first * CH]);
                if first < TILE_WIDTH {
                    let rest = TILE_WIDTH - first;
                    let src = (y0 + r) * STRIP_WIDTH * CH;
                    image.data_mut()[dst + first * CH..dst + TILE_WIDTH * CH]
                        .copy_from_slice(&strip.data()[src..src + rest * CH]);
                }
            }
            tiles.push(PerspectiveTile {
                image,
                pano_id: pano_id.to_string(),
                yaw_index: yaw_index as u8,
                pitch_index: pitch_index as u8,
                location,
            });
        }
    }
    Ok(tiles)
}

/// Full panorama pipeline: project, stitch, crop, cut.
pub fn panorama_to_tiles(pano: &PanoramaRecord) -> Result<Vec<PerspectiveTile>, PanoramaError> {
    let faces = project_to_faces(pano)?;
    let strip = stitch_and_crop(&faces)?;
    cut_tiles(&strip, &pano.pano_id, pano.location)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn test_location() -> GeoPoint {
        GeoPoint::new(52.37, 4.89).unwrap()
    }

    fn constant_pano(rgb: [u8; 3]) -> PanoramaRecord {
        PanoramaRecord::new(
            RasterImage::filled(PANO_WIDTH, PANO_HEIGHT, rgb),
            test_location(),
            2019,
            "pano".into(),
        )
        .unwrap()
    }

    fn random_strip(seed: u64) -> RasterImage {
        let mut rng = SplitMix64::new(seed);
        let mut data = vec![0u8; STRIP_WIDTH * STRIP_HEIGHT * 3];
        for b in data.iter_mut() {
            *b = rng.below(256) as u8;
        }
        RasterImage::from_raw(STRIP_WIDTH, STRIP_HEIGHT, data).unwrap()
    }

    #[test]
    fn record_rejects_bad_dimensions() {
        let img = RasterImage::new(100, 100);
        assert!(PanoramaRecord::new(img, test_location(), 2019, "x".into()).is_err());
    }

    #[test]
    fn constant_panorama_gives_constant_faces() {
        let pano = constant_pano([13, 200, 77]);
        let faces = project_to_faces(&pano).unwrap();
        for face in Face::ALL {
            let img = faces.get(face);
            assert_eq!(img.width(), FACE_SIZE);
            assert_eq!(img.height(), FACE_SIZE);
            assert!(img.data().chunks_exact(3).all(|p| p == [13, 200, 77]));
        }
    }

    #[test]
    fn front_center_maps_to_pano_center() {
        let center = (FACE_SIZE as f64 - 1.0) / 2.0;
        let dir = face_direction(Face::Front, center, center, FACE_SIZE);
        assert!((dir[0]).abs() < 1e-12 && (dir[1]).abs() < 1e-12 && (dir[2] - 1.0).abs() < 1e-12);
        let (row, col) = direction_to_equirect(dir, PANO_WIDTH, PANO_HEIGHT);
        assert!((row - (PANO_HEIGHT as f64 - 1.0) / 2.0).abs() < 1e-9);
        assert!((col - (PANO_WIDTH as f64 - 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn face_corner_matches_analytic_angles() {
        // Continuous top-right corner of the front face: direction
        // (1, 1, 1)/sqrt(3) = azimuth 45 deg, elevation asin(1/sqrt(3)) =
        // 35.26439 deg. Equirect coords computed independently:
        //   col = (W-1)/2 + (pi/4) * W / (2 pi)       = 2499.5
        //   row = (H-1)/2 - asin(1/sqrt 3) * H / pi   = 607.67345
        let center = (FACE_SIZE as f64 - 1.0) / 2.0;
        let focal = FACE_SIZE as f64 / 2.0;
        let dir = face_direction(Face::Front, center - focal, center + focal, FACE_SIZE);
        let inv_sqrt3 = 1.0 / 3f64.sqrt();
        for d in dir {
            assert!((d.abs() - inv_sqrt3).abs() < 1e-12);
        }
        assert!(dir[0] > 0.0 && dir[1] > 0.0 && dir[2] > 0.0);
        let (row, col) = direction_to_equirect(dir, PANO_WIDTH, PANO_HEIGHT);
        assert!((col - 2499.5).abs() < 1e-9, "col = {col}");
        assert!((row - 607.6734479693926).abs() < 1e-9, "row = {row}");
    }

    #[test]
    fn lateral_face_axes_step_by_90_degrees() {
        let center = (FACE_SIZE as f64 - 1.0) / 2.0;
        let yaws: Vec<f64> = Face::LATERAL
            .iter()
            .map(|&f| {
                let d = face_direction(f, center, center, FACE_SIZE);
                d[0].atan2(d[2]).to_degrees()
            })
            .collect();
        assert!((yaws[0] - 0.0).abs() < 1e-9);
        assert!((yaws[1] - 90.0).abs() < 1e-9);
        assert!((yaws[2].abs() - 180.0).abs() < 1e-9);
        assert!((yaws[3] + 90.0).abs() < 1e-9);
    }

    #[test]
    fn stitch_dimensions_and_identity() {
        let pano = constant_pano([1, 2, 3]);
        let faces = project_to_faces(&pano).unwrap();
        let strip = stitch_and_crop(&faces).unwrap();
        assert_eq!(strip.height(), 720);
        assert_eq!(strip.width(), 3840);
        assert!(strip.data().chunks_exact(3).all(|p| p == [1, 2, 3]));
    }

    #[test]
    fn stitch_places_right_face_second() {
        // Synthesize distinct faces directly.
        let mk = |v: u8| RasterImage::filled(FACE_SIZE, FACE_SIZE, [v, v, v]);
        let faces = CubeFaces {
            faces: [mk(10), mk(20), mk(30), mk(40), mk(50), mk(60)],
        };
        let strip = stitch_and_crop(&faces).unwrap();
        for r in [0, 359, 719] {
            for c in [0, 100, 959] {
                assert_eq!(strip.pixel(r, 960 + c), faces.get(Face::Right).pixel(r, c));
            }
        }
        assert_eq!(strip.pixel(0, 0), [10, 10, 10]);
        assert_eq!(strip.pixel(0, 2000), [30, 30, 30]);
        assert_eq!(strip.pixel(0, 3000), [40, 40, 40]);
    }

    #[test]
    fn tiles_have_expected_shape() {
        let strip = random_strip(1);
        let tiles = cut_tiles(&strip, "p", test_location()).unwrap();
        assert_eq!(tiles.len(), 24);
        for t in &tiles {
            assert_eq!(t.image.height(), 480);
            assert_eq!(t.image.width(), 640);
        }
        assert_eq!(tiles[0].image.pixel(0, 0), strip.pixel(0, 0));
        assert_eq!(tiles[0].pitch_index, 0);
        assert_eq!(tiles[0].yaw_index, 0);
    }

    #[test]
    fn tile_reassembly_is_pixel_exact() {
        let strip = random_strip(2);
        let tiles = cut_tiles(&strip, "p", test_location()).unwrap();
        let mut rebuilt = RasterImage::new(STRIP_WIDTH, STRIP_HEIGHT);
        for t in &tiles {
            let y0 = t.pitch_index as usize * (STRIP_HEIGHT - TILE_HEIGHT);
            let x0 = t.yaw_index as usize * TILE_COLUMN_STRIDE;
            for r in 0..TILE_HEIGHT {
                for c in 0..TILE_WIDTH {
                    rebuilt.set_pixel(y0 + r, (x0 + c) % STRIP_WIDTH, t.image.pixel(r, c));
                }
            }
        }
        assert_eq!(rebuilt, strip);
    }

    #[test]
    fn tile_coverage_counts() {
        // Column coverage: 12 tiles of width 640 at stride 320 over 3840
        // columns (with wrap) cover every column exactly twice. Row coverage:
        // rows 240..480 belong to both pitch tiles, the rest to one.
        let mut col_cover = vec![0usize; STRIP_WIDTH];
        for k in 0..YAW_STEPS {
            for c in 0..TILE_WIDTH {
                col_cover[(k * TILE_COLUMN_STRIDE + c) % STRIP_WIDTH] += 1;
            }
        }
        assert!(col_cover.iter().all(|&n| n == 2));

        let mut row_cover = vec![0usize; STRIP_HEIGHT];
        for p in 0..PITCH_STEPS {
            let y0 = p * (STRIP_HEIGHT - TILE_HEIGHT);
            for r in 0..TILE_HEIGHT {
                row_cover[y0 + r] += 1;
            }
        }
        assert!(row_cover[..240].iter().all(|&n| n == 1));
        assert!(row_cover[240..480].iter().all(|&n| n == 2));
        assert!(row_cover[480..].iter().all(|&n| n == 1));
    }

    #[test]
    fn cut_rejects_bad_strip() {
        let strip = RasterImage::new(100, 100);
        assert!(cut_tiles(&strip, "p", test_location()).is_err());
    }

    #[test]
    fn projection_matches_analytic_sampling() {
        // Panorama with a smooth direction-indexed pattern; face pixels must
        // match an independent evaluation of the gnomonic formula followed by
        // bilinear sampling, within one intensity level.
        let mut img = RasterImage::new(PANO_WIDTH, PANO_HEIGHT);
        for r in 0..PANO_HEIGHT {
            for c in 0..PANO_WIDTH {
                let v = ((r / 8 + c / 8) % 251) as u8;
                img.set_pixel(r, c, [v, v.wrapping_add(40), v.wrapping_add(90)]);
            }
        }
        let pano = PanoramaRecord::new(img, test_location(), 2018, "pat".into()).unwrap();
        let faces = project_to_faces(&pano).unwrap();

        let analytic = |face: Face, r: usize, c: usize| -> [u8; 3] {
            // Independent derivation: unnormalized ray, then spherical angles.
            let (fwd, right, down) = match face {
                Face::Front => ([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0f64, -1.0, 0.0]),
                Face::Right => ([1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, -1.0, 0.0]),
                Face::Back => ([0.0, 0.0, -1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]),
                Face::Left => ([-1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]),
                _ => unreachable!(),
            };
            let center = (FACE_SIZE as f64 - 1.0) / 2.0;
            let u = (c as f64 - center) / (FACE_SIZE as f64 / 2.0);
            let v = (r as f64 - center) / (FACE_SIZE as f64 / 2.0);
            let d = [
                fwd[0] + u * right[0] + v * down[0],
                fwd[1] + u * right[1] + v * down[1],
                fwd[2] + u * right[2] + v * down[2],
            ];
            let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            let yaw = d[0].atan2(d[2]);
            let pitch = (d[1] / norm).asin();
            let col = (PANO_WIDTH as f64 - 1.0) / 2.0
                + yaw * PANO_WIDTH as f64 / (2.0 * std::f64::consts::PI);
            let row = (PANO_HEIGHT as f64 - 1.0) / 2.0
                - pitch * PANO_HEIGHT as f64 / std::f64::consts::PI;
            sample_equirect(&pano.image, row, col)
        };

        for face in Face::LATERAL {
            for (r, c) in [(0, 0), (100, 700), (480, 480), (959, 959), (333, 12)] {
                let got = faces.get(face).pixel(r, c);
                let want = analytic(face, r, c);
                for ch in 0..3 {
                    assert!(
                        (got[ch] as i16 - want[ch] as i16).abs() <= 1,
                        "{face:?} ({r},{c}) got {got:?} want {want:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn pipeline_is_deterministic() {
        let strip = random_strip(3);
        let a = cut_tiles(&strip, "p", test_location()).unwrap();
        let b = cut_tiles(&strip, "p", test_location()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.image, y.image);
        }
    }

    #[test]
    fn tile_names() {
        assert_eq!(tile_file_name("TMX123", 1, 11), "TMX123_p1_y11.png");
    }
}
