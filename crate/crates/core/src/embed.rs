//! Image descriptors: handcrafted features plus a trainable linear map.
//!
//! Deep backbones are out of scope here; the learnable metric only needs a
//! differentiable parametric embedding, so images are reduced to a fixed
//! 384-dim feature vector (a 16x16 grayscale intensity grid plus an 8-bin
//! gradient-orientation histogram for each cell of a 4x4 block grid,
//! computed on a 64x64 bilinear resize) and mapped through a trainable
//! F x D matrix. Embeddings are L2-normalized, so the metric
//! `d(x, y) = ||e_x - e_y||` lives in [0, 2] and is invariant to positive
//! rescaling of the weights.
//!
//! Parameter files: little-endian, header `{magic "IOVP", version u32,
//! F u32, D u32, seed u64}` followed by F*D row-major f64 weights.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::raster::{resize_bilinear_gray, to_grayscale, RasterImage};
use crate::rng::{fnv1a64, SplitMix64};

/// Side of the internal grayscale working image.
const ANALYSIS_SIZE: usize = 64;
/// Intensity features: 16x16 grid of 4x4-pixel block means.
const INTENSITY_GRID: usize = 16;
/// Gradient features: 4x4 grid of blocks, 8 orientation bins each.
const HIST_GRID: usize = 4;
const HIST_BINS: usize = 8;

/// Total feature dimension: 256 intensities + 128 histogram bins.
pub const FEATURE_DIM: usize =
    INTENSITY_GRID * INTENSITY_GRID + HIST_GRID * HIST_GRID * HIST_BINS;

/// Default embedding dimension.
pub const DEFAULT_EMBED_DIM: usize = 64;

const PARAMS_MAGIC: &[u8; 4] = b"IOVP";
const PARAMS_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("image must be non-empty")]
    EmptyImage,
    #[error("feature vector has dimension {got}, params expect {expected}")]
    FeatureDimensionMismatch { expected: usize, got: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad params file: {0}")]
    BadParamsFile(String),
}

/// Fixed-length feature vector; a deterministic function of the image bytes.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    /// Wraps raw feature values. Production features come from
    /// [`extract_features`]; this exists for synthetic inputs in tests and
    /// gradient checks.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Unit-norm descriptor.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    /// Wraps a raw vector; callers must uphold the unit-norm invariant
    /// (used by tests and the store loader, which persists normalized
    /// vectors).
    pub fn from_raw(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Squared Euclidean distance between embeddings.
pub fn distance_sq(a: &Embedding, b: &Embedding) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Euclidean distance between embeddings (the metric d of the pipeline).
pub fn distance(a: &Embedding, b: &Embedding) -> f64 {
    distance_sq(a, b).sqrt()
}

/// Trainable linear map from feature space to embedding space.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbedderParams {
    feature_dim: usize,
    embed_dim: usize,
    seed: u64,
    /// Row-major F x D.
    weights: Vec<f64>,
}

impl EmbedderParams {
    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn from_weights(feature_dim: usize, embed_dim: usize, seed: u64, weights: Vec<f64>) -> Self {
        assert_eq!(weights.len(), feature_dim * embed_dim);
        Self { feature_dim, embed_dim, seed, weights }
    }
}

/// Initializes weights i.i.d. uniform in `[-1/sqrt(F), 1/sqrt(F))`, drawn
/// row-major from a SplitMix64 stream seeded with `seed`.
pub fn init_params(seed: u64, feature_dim: usize, embed_dim: usize) -> EmbedderParams {
    assert!(feature_dim >= 1 && embed_dim >= 1, "dimensions must be >= 1");
    let half = 1.0 / (feature_dim as f64).sqrt();
    let mut rng = SplitMix64::new(seed);
    let weights = (0..feature_dim * embed_dim)
        .map(|_| rng.uniform(-half, half))
        .collect();
    EmbedderParams { feature_dim, embed_dim, seed, weights }
}

/// Extracts the handcrafted feature vector.
///
/// Intensities are block means in [0, 1]; each gradient histogram is
/// L1-normalized (all-zero histograms stay zero, e.g. constant images).
pub fn extract_features(img: &RasterImage) -> Result<FeatureVector, EmbedError> {
    if img.width() == 0 || img.height() == 0 {
        return Err(EmbedError::EmptyImage);
    }
    let gray = resize_bilinear_gray(
        &to_grayscale(img),
        img.width(),
        img.height(),
        ANALYSIS_SIZE,
        ANALYSIS_SIZE,
    );

    let mut values = Vec::with_capacity(FEATURE_DIM);

    // 16x16 block-mean intensity grid.
    let cell = ANALYSIS_SIZE / INTENSITY_GRID;
    for br in 0..INTENSITY_GRID {
        for bc in 0..INTENSITY_GRID {
            let mut sum = 0.0;
            for r in 0..cell {
                for c in 0..cell {
                    sum += gray[(br * cell + r) * ANALYSIS_SIZE + bc * cell + c];
                }
            }
            values.push(sum / (cell * cell) as f64);
        }
    }

    // Sobel gradients with edge replication.
    let at = |r: i64, c: i64| -> f64 {
        let r = r.clamp(0, ANALYSIS_SIZE as i64 - 1) as usize;
        let c = c.clamp(0, ANALYSIS_SIZE as i64 - 1) as usize;
        gray[r * ANALYSIS_SIZE + c]
    };
    let block = ANALYSIS_SIZE / HIST_GRID;
    let mut hist = vec![0.0f64; HIST_GRID * HIST_GRID * HIST_BINS];
    for r in 0..ANALYSIS_SIZE {
        for c in 0..ANALYSIS_SIZE {
            let (ri, ci) = (r as i64, c as i64);
            // Paired differences so flat regions cancel exactly.
            let gx = (at(ri - 1, ci + 1) - at(ri - 1, ci - 1))
                + 2.0 * (at(ri, ci + 1) - at(ri, ci - 1))
                + (at(ri + 1, ci + 1) - at(ri + 1, ci - 1));
            let gy = (at(ri + 1, ci - 1) - at(ri - 1, ci - 1))
                + 2.0 * (at(ri + 1, ci) - at(ri - 1, ci))
                + (at(ri + 1, ci + 1) - at(ri - 1, ci + 1));
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let theta = gy.atan2(gx);
            let bin = (((theta + std::f64::consts::PI) / (2.0 * std::f64::consts::PI)
                * HIST_BINS as f64)
                .floor() as usize)
                % HIST_BINS;
            let b = (r / block) * HIST_GRID + c / block;
            hist[b * HIST_BINS + bin] += mag;
        }
    }
    for b in 0..HIST_GRID * HIST_GRID {
        let slot = &mut hist[b * HIST_BINS..(b + 1) * HIST_BINS];
        let sum: f64 = slot.iter().sum();
        if sum > 0.0 {
            for v in slot.iter_mut() {
                *v /= sum;
            }
        }
    }
    values.extend_from_slice(&hist);

    debug_assert_eq!(values.len(), FEATURE_DIM);
    Ok(FeatureVector { values })
}

/// Maps features through the linear layer and L2-normalizes.
///
/// A zero pre-normalization vector is replaced by the first unit basis
/// vector; the returned flag marks that fallback so callers can count it.
pub fn embed_features(params: &EmbedderParams, features: &FeatureVector) -> (Embedding, bool) {
    assert_eq!(
        features.len(),
        params.feature_dim,
        "feature dimension mismatch"
    );
    let d = params.embed_dim;
    let mut z = vec![0.0f64; d];
    for (f, &x) in features.values.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        let row = &params.weights[f * d..(f + 1) * d];
        for (zi, &w) in z.iter_mut().zip(row) {
            *zi += w * x;
        }
    }
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        return (Embedding { values: e }, true);
    }
    for v in z.iter_mut() {
        *v /= norm;
    }
    (Embedding { values: z }, false)
}

/// Embeds an image; logs a warning when the zero-vector fallback fires.
pub fn embed(params: &EmbedderParams, img: &RasterImage) -> Result<Embedding, EmbedError> {
    let features = extract_features(img)?;
    let (e, fallback) = embed_features(params, &features);
    if fallback {
        log::warn!("zero pre-normalization embedding; substituted basis vector");
    }
    Ok(e)
}

/// Serializes params to the flat binary layout.
pub fn params_to_bytes(params: &EmbedderParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + params.weights.len() * 8);
    out.extend_from_slice(PARAMS_MAGIC);
    out.extend_from_slice(&PARAMS_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.feature_dim as u32).to_le_bytes());
    out.extend_from_slice(&(params.embed_dim as u32).to_le_bytes());
    out.extend_from_slice(&params.seed.to_le_bytes());
    for w in &params.weights {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

pub fn params_from_bytes(bytes: &[u8]) -> Result<EmbedderParams, EmbedError> {
    let bad = |m: &str| EmbedError::BadParamsFile(m.to_string());
    if bytes.len() < 24 {
        return Err(bad("truncated header"));
    }
    if &bytes[0..4] != PARAMS_MAGIC {
        return Err(bad("wrong magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != PARAMS_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let feature_dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let embed_dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let seed = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let expected = 24 + feature_dim * embed_dim * 8;
    if bytes.len() != expected {
        return Err(bad(&format!(
            "expected {expected} bytes for {feature_dim}x{embed_dim}, got {}",
            bytes.len()
        )));
    }
    let weights = bytes[24..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(EmbedderParams { feature_dim, embed_dim, seed, weights })
}

pub fn write_params(path: &Path, params: &EmbedderParams) -> Result<(), EmbedError> {
    let io_err = |source| EmbedError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io_err)?;
    f.write_all(&params_to_bytes(params)).map_err(io_err)
}

pub fn read_params(path: &Path) -> Result<EmbedderParams, EmbedError> {
    let io_err = |source| EmbedError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(io_err)?
        .read_to_end(&mut bytes)
        .map_err(io_err)?;
    params_from_bytes(&bytes)
}

/// FNV-1a checksum of the serialized params, used in training reports.
pub fn params_checksum(params: &EmbedderParams) -> u64 {
    fnv1a64(&params_to_bytes(params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_image() -> RasterImage {
        RasterImage::filled(32, 24, [120, 120, 120])
    }

    #[test]
    fn constant_image_features() {
        let f = extract_features(&constant_image()).unwrap();
        let vals = f.as_slice();
        // Intensity cells equal and near 120/255; histograms all zero.
        let level = vals[0];
        assert!((level - 120.0 / 255.0).abs() < 1e-6);
        assert!(vals[..256].iter().all(|&v| (v - level).abs() < 1e-12));
        assert!(vals[256..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn features_are_deterministic() {
        let mut img = RasterImage::new(100, 60);
        for (i, b) in img.data_mut().iter_mut().enumerate() {
            *b = (i * 31 % 256) as u8;
        }
        assert_eq!(
            extract_features(&img).unwrap(),
            extract_features(&img.clone()).unwrap()
        );
    }

    #[test]
    fn vertical_step_edge_hits_horizontal_bins() {
        // Dark left half, bright right half: Sobel response is purely gx,
        // so orientation is 0 or pi, i.e. bins 4 and 0.
        let mut img = RasterImage::new(64, 64);
        for r in 0..64 {
            for c in 32..64 {
                img.set_pixel(r, c, [255, 255, 255]);
            }
        }
        let f = extract_features(&img).unwrap();
        let hist = &f.as_slice()[256..];
        let total: f64 = hist.iter().sum();
        assert!(total > 0.0);
        let horizontal: f64 = (0..HIST_GRID * HIST_GRID)
            .map(|b| hist[b * HIST_BINS] + hist[b * HIST_BINS + 4])
            .sum();
        assert!(horizontal / total > 0.99, "ratio {}", horizontal / total);
    }

    #[test]
    fn zero_size_image_rejected() {
        let img = RasterImage::new(0, 10);
        assert!(matches!(extract_features(&img), Err(EmbedError::EmptyImage)));
    }

    #[test]
    fn embedding_is_unit_norm() {
        let params = init_params(3, FEATURE_DIM, 16);
        let e = embed(&params, &constant_image()).unwrap();
        let norm: f64 = e.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
    }

    #[test]
    fn identity_padded_weights_on_constant_image() {
        // W = identity padded with zeros selects the first D features;
        // a constant image has equal intensity features there, so the
        // embedding is the normalized constant vector (1/sqrt(D), ...).
        let d = 4;
        let mut weights = vec![0.0; FEATURE_DIM * d];
        for i in 0..d {
            weights[i * d + i] = 1.0;
        }
        let params = EmbedderParams::from_weights(FEATURE_DIM, d, 0, weights);
        let e = embed(&params, &constant_image()).unwrap();
        let expect = 1.0 / (d as f64).sqrt();
        for v in e.as_slice() {
            assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
        }
    }

    #[test]
    fn embedding_invariant_to_weight_scale() {
        let params = init_params(5, FEATURE_DIM, 8);
        let mut scaled = params.clone();
        for w in scaled.weights_mut() {
            *w *= 5.0;
        }
        let img = {
            let mut img = RasterImage::new(40, 30);
            for (i, b) in img.data_mut().iter_mut().enumerate() {
                *b = (i % 251) as u8;
            }
            img
        };
        let a = embed(&params, &img).unwrap();
        let b = embed(&scaled, &img).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_scale_preserves_rankings() {
        let params = init_params(9, FEATURE_DIM, 8);
        let mut scaled = params.clone();
        for w in scaled.weights_mut() {
            *w *= 5.0;
        }
        let mut rng = SplitMix64::new(4);
        let gallery: Vec<RasterImage> = (0..12)
            .map(|_| {
                let mut img = RasterImage::new(24, 24);
                for b in img.data_mut().iter_mut() {
                    *b = rng.below(256) as u8;
                }
                img
            })
            .collect();
        let q = &gallery[0];
        let rank = |p: &EmbedderParams| -> Vec<usize> {
            let qe = embed(p, q).unwrap();
            let mut order: Vec<(f64, usize)> = gallery
                .iter()
                .enumerate()
                .map(|(i, g)| (distance(&qe, &embed(p, g).unwrap()), i))
                .collect();
            order.sort_by(|a, b| a.partial_cmp(b).unwrap());
            order.into_iter().map(|(_, i)| i).collect()
        };
        assert_eq!(rank(&params), rank(&scaled));
    }

    #[test]
    fn zero_features_fall_back_to_basis_vector() {
        let params = init_params(0, 4, 3);
        let f = FeatureVector { values: vec![0.0; 4] };
        let (e, fallback) = embed_features(&params, &f);
        assert!(fallback);
        assert_eq!(e.as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn init_is_reproducible() {
        assert_eq!(init_params(9, 10, 4), init_params(9, 10, 4));
        assert_ne!(init_params(9, 10, 4), init_params(10, 10, 4));
    }

    #[test]
    fn init_reference_vector() {
        // Frozen from the documented SplitMix64 stream (seed 0, F=4, D=2):
        // u = (next() >> 11) * 2^-53, w = -0.5 + u.
        let params = init_params(0, 4, 2);
        let expected = [
            0.3833108082136426,
            -0.06847200295149003,
            -0.47356622840740226,
            0.4708819781538285,
            -0.39365330843278756,
            -0.17267423578187424,
            -0.32613213404031716,
            0.271546556331567,
        ];
        for (w, e) in params.weights().iter().zip(expected) {
            assert_eq!(*w, e);
        }
    }

    #[test]
    fn init_range() {
        let params = init_params(1, 64, 4);
        let half = 1.0 / 8.0;
        assert!(params.weights().iter().all(|w| (-half..half).contains(w)));
    }

    #[test]
    fn params_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.bin");
        let params = init_params(7, 12, 5);
        write_params(&path, &params).unwrap();
        assert_eq!(read_params(&path).unwrap(), params);
    }

    #[test]
    fn params_bad_magic_rejected() {
        let mut bytes = params_to_bytes(&init_params(0, 2, 2));
        bytes[0] = b'X';
        assert!(matches!(
            params_from_bytes(&bytes),
            Err(EmbedError::BadParamsFile(_))
        ));
    }

    #[test]
    fn checksum_tracks_content() {
        let a = init_params(1, 8, 4);
        let mut b = a.clone();
        assert_eq!(params_checksum(&a), params_checksum(&b));
        b.weights_mut()[0] += 1e-9;
        assert_ne!(params_checksum(&a), params_checksum(&b));
    }

    #[test]
    fn distance_bounds() {
        let params = init_params(2, FEATURE_DIM, 16);
        let a = embed(&params, &RasterImage::filled(10, 10, [0, 0, 0])).unwrap();
        let b = embed(&params, &RasterImage::filled(10, 10, [255, 255, 255])).unwrap();
        assert_eq!(distance(&a, &a), 0.0);
        assert!((distance(&a, &b) - distance(&b, &a)).abs() < 1e-15);
        assert!(distance(&a, &b) <= 2.0 + 1e-12);
    }
}
