//! Synthetic indoor-query generation by mask compositing.
//!
//! A layout is an indoor image whose pixels are annotated window /
//! non-window. Compositing keeps the street-view query's pixels where the
//! mask is 1 (the window) and the layout's pixels elsewhere, producing a
//! training query that looks like an indoor scene with the outdoor world
//! visible through the window:
//!
//! ```text
//! out = q (.) b  +  c (.) inverse(b)        (exact integer copy, no blending)
//! ```
//!
//! Gray layouts replace the non-window layout content with the ImageNet mean
//! color so the model sees no indoor detail at all. Layout sets are filtered
//! by window proportion with strict `>` semantics (a ">20%" set contains
//! proportions in (0.2, 1]).

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{RasterImage, CHANNELS};

/// ImageNet training-set mean color (0.485, 0.456, 0.406 scaled to bytes).
pub const IMAGENET_MEAN_RGB: [u8; 3] = [124, 116, 104];

/// Width/height every layout is resized to before compositing.
pub const LAYOUT_WIDTH: usize = 640;
pub const LAYOUT_HEIGHT: usize = 480;

/// Window-proportion presets used when filtering layout sets.
pub const PROPORTION_PRESETS: [f64; 4] = [0.05, 0.10, 0.20, 0.30];

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("dimension mismatch: query {q_w}x{q_h}, mask {m_w}x{m_h}, layout {l_w}x{l_h}")]
    DimensionMismatch {
        q_w: usize,
        q_h: usize,
        m_w: usize,
        m_h: usize,
        l_w: usize,
        l_h: usize,
    },
    #[error("mask is zero-sized")]
    EmptyMask,
    #[error("mask bits must be 0 or 1")]
    BadMaskValue,
    #[error("mask {mask_w}x{mask_h} does not match image {img_w}x{img_h}")]
    MaskImageMismatch {
        mask_w: usize,
        mask_h: usize,
        img_w: usize,
        img_h: usize,
    },
    #[error("mask file for {id:?} not found under {dir}")]
    MaskNotFound { id: String, dir: String },
    #[error("gray layout {layout_id} has non-window pixels that are not the gray fill color")]
    NotGray { layout_id: String },
    #[error(transparent)]
    Raster(#[from] crate::raster::RasterError),
}

/// Binary window mask: 1 = window pixel, 0 = non-window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayoutMask {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

impl LayoutMask {
    pub fn from_bits(width: usize, height: usize, bits: Vec<u8>) -> Result<Self, AugmentError> {
        if bits.len() != width * height {
            return Err(AugmentError::MaskImageMismatch {
                mask_w: width,
                mask_h: height,
                img_w: bits.len(),
                img_h: 1,
            });
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(AugmentError::BadMaskValue);
        }
        Ok(Self { width, height, bits })
    }

    pub fn filled(width: usize, height: usize, bit: u8) -> Self {
        Self {
            width,
            height,
            bits: vec![bit & 1; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn bit(&self, row: usize, col: usize) -> u8 {
        self.bits[row * self.width + col]
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    /// Nearest-neighbor resize (preserves binarity).
    pub fn resize_nearest(&self, new_width: usize, new_height: usize) -> Self {
        let mut bits = Vec::with_capacity(new_width * new_height);
        for r in 0..new_height {
            let sr = ((r as f64 + 0.5) * self.height as f64 / new_height as f64) as usize;
            let sr = sr.min(self.height - 1);
            for c in 0..new_width {
                let sc = ((c as f64 + 0.5) * self.width as f64 / new_width as f64) as usize;
                let sc = sc.min(self.width - 1);
                bits.push(self.bits[sr * self.width + sc]);
            }
        }
        Self { width: new_width, height: new_height, bits }
    }

    /// Loads a single-channel 0/255 PNG; values >= 128 become 1.
    pub fn load_png(path: &Path) -> Result<Self, AugmentError> {
        let img = image::open(path)
            .map_err(|source| crate::raster::RasterError::Read {
                path: path.display().to_string(),
                source,
            })?
            .into_luma8();
        let (w, h) = img.dimensions();
        Ok(Self {
            width: w as usize,
            height: h as usize,
            bits: img.into_raw().into_iter().map(|v| (v >= 128) as u8).collect(),
        })
    }

    pub fn save_png(&self, path: &Path) -> Result<(), AugmentError> {
        let buf: image::GrayImage = image::ImageBuffer::from_raw(
            self.width as u32,
            self.height as u32,
            self.bits.iter().map(|&b| b * 255).collect(),
        )
        .expect("bits length invariant");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| crate::raster::RasterError::Write {
                path: path.display().to_string(),
                source,
            })?;
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LayoutKind {
    Real,
    Gray,
}

/// An indoor layout image with its window mask.
#[derive(Clone, Debug)]
pub struct LayoutRecord {
    pub layout_id: String,
    pub image: RasterImage,
    pub mask: LayoutMask,
    pub window_proportion: f64,
    pub kind: LayoutKind,
}

impl LayoutRecord {
    /// Builds a record, checking image/mask dimensions and computing the
    /// window proportion from the mask. Gray records must already have
    /// every non-window pixel at the gray fill color.
    pub fn new(
        layout_id: String,
        image: RasterImage,
        mask: LayoutMask,
        kind: LayoutKind,
    ) -> Result<Self, AugmentError> {
        if image.width() != mask.width() || image.height() != mask.height() {
            return Err(AugmentError::MaskImageMismatch {
                mask_w: mask.width(),
                mask_h: mask.height(),
                img_w: image.width(),
                img_h: image.height(),
            });
        }
        if kind == LayoutKind::Gray {
            for (i, &bit) in mask.bits().iter().enumerate() {
                if bit == 0 && image.data()[i * CHANNELS..i * CHANNELS + 3] != IMAGENET_MEAN_RGB {
                    return Err(AugmentError::NotGray { layout_id });
                }
            }
        }
        let window_proportion = window_proportion(&mask)?;
        Ok(Self { layout_id, image, mask, window_proportion, kind })
    }
}

/// Class-id raster from a semantic segmentation annotation.
#[derive(Clone, Debug)]
pub struct AnnotationRaster {
    pub width: usize,
    pub height: usize,
    pub class_ids: Vec<u16>,
}

/// Mask bit = 1 iff the pixel's class id is one of `window_ids`.
pub fn binarize_annotation(annotation: &AnnotationRaster, window_ids: &[u16]) -> LayoutMask {
    let window: HashSet<u16> = window_ids.iter().copied().collect();
    LayoutMask {
        width: annotation.width,
        height: annotation.height,
        bits: annotation
            .class_ids
            .iter()
            .map(|id| window.contains(id) as u8)
            .collect(),
    }
}

/// Fraction of 1-bits. Zero-sized masks are rejected.
pub fn window_proportion(mask: &LayoutMask) -> Result<f64, AugmentError> {
    let total = mask.width() * mask.height();
    if total == 0 {
        return Err(AugmentError::EmptyMask);
    }
    Ok(mask.ones() as f64 / total as f64)
}

/// Replaces every non-window pixel with [`IMAGENET_MEAN_RGB`]; window pixels
/// and the mask are unchanged. Idempotent.
pub fn make_gray_layout(layout: &LayoutRecord) -> LayoutRecord {
    let mut image = layout.image.clone();
    let data = image.data_mut();
    for (i, &bit) in layout.mask.bits().iter().enumerate() {
        if bit == 0 {
            data[i * CHANNELS..i * CHANNELS + 3].copy_from_slice(&IMAGENET_MEAN_RGB);
        }
    }
    LayoutRecord {
        layout_id: layout.layout_id.clone(),
        image,
        mask: layout.mask.clone(),
        window_proportion: layout.window_proportion,
        kind: LayoutKind::Gray,
    }
}

/// The augmentation: window pixels from the query, non-window pixels from
/// the layout. All three operands must share dimensions.
pub fn composite(
    query: &RasterImage,
    mask: &LayoutMask,
    layout: &RasterImage,
) -> Result<RasterImage, AugmentError> {
    if query.width() != mask.width()
        || query.height() != mask.height()
        || layout.width() != mask.width()
        || layout.height() != mask.height()
    {
        return Err(AugmentError::DimensionMismatch {
            q_w: query.width(),
            q_h: query.height(),
            m_w: mask.width(),
            m_h: mask.height(),
            l_w: layout.width(),
            l_h: layout.height(),
        });
    }
    let mut out = layout.clone();
    let dst = out.data_mut();
    let src = query.data();
    for (i, &bit) in mask.bits().iter().enumerate() {
        if bit == 1 {
            dst[i * CHANNELS..i * CHANNELS + 3].copy_from_slice(&src[i * CHANNELS..i * CHANNELS + 3]);
        }
    }
    Ok(out)
}

/// Masks a query for the gray-layout inference path: window pixels kept,
/// everything else set to the ImageNet mean color.
pub fn gray_composite_query(query: &RasterImage, mask: &LayoutMask) -> Result<RasterImage, AugmentError> {
    let gray = RasterImage::filled(query.width(), query.height(), IMAGENET_MEAN_RGB);
    composite(query, mask, &gray)
}

/// Keeps records whose window proportion is strictly greater than
/// `threshold` (">k%" means k%-100%).
pub fn filter_layouts(layouts: Vec<LayoutRecord>, threshold: f64) -> Vec<LayoutRecord> {
    layouts
        .into_iter()
        .filter(|l| l.window_proportion > threshold)
        .collect()
}

/// Resizes a layout to the given dimensions: bilinear for the image,
/// nearest-neighbor for the mask (preserving binarity). The window
/// proportion is recomputed from the resized mask.
pub fn resize_layout(
    layout: &LayoutRecord,
    width: usize,
    height: usize,
) -> Result<LayoutRecord, AugmentError> {
    if layout.image.width() == width && layout.image.height() == height {
        return Ok(layout.clone());
    }
    let image = crate::raster::resize_bilinear(&layout.image, width, height);
    let mask = layout.mask.resize_nearest(width, height);
    // A resized gray layout may interpolate at window borders; regraying
    // restores the fill invariant without touching window pixels.
    match layout.kind {
        LayoutKind::Gray => {
            let real = LayoutRecord::new(layout.layout_id.clone(), image, mask, LayoutKind::Real)?;
            Ok(make_gray_layout(&real))
        }
        LayoutKind::Real => {
            LayoutRecord::new(layout.layout_id.clone(), image, mask, LayoutKind::Real)
        }
    }
}

/// Produces a window mask for a query image. Implementations must return a
/// mask with the image's dimensions.
pub trait MaskProvider {
    fn window_mask(&self, id: &str, image: &RasterImage) -> Result<LayoutMask, AugmentError>;
}

/// Marks the whole frame as window; composites become the identity.
pub struct FullFrameMaskProvider;

impl MaskProvider for FullFrameMaskProvider {
    fn window_mask(&self, _id: &str, image: &RasterImage) -> Result<LayoutMask, AugmentError> {
        Ok(LayoutMask::filled(image.width(), image.height(), 1))
    }
}

/// Luma threshold: pixels at or above `threshold` are window.
pub struct ThresholdMaskProvider {
    pub threshold: u8,
}

impl MaskProvider for ThresholdMaskProvider {
    fn window_mask(&self, _id: &str, image: &RasterImage) -> Result<LayoutMask, AugmentError> {
        let bits = crate::raster::to_grayscale(image)
            .into_iter()
            .map(|v| (v * 255.0 >= self.threshold as f64) as u8)
            .collect();
        LayoutMask::from_bits(image.width(), image.height(), bits)
    }
}

/// Reads precomputed mask PNGs named `<id>.png` from a directory. This is
/// how externally segmented masks (e.g. from an off-the-shelf window
/// segmentation network) enter the pipeline.
pub struct FileMaskProvider {
    dir: PathBuf,
}

impl FileMaskProvider {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

impl MaskProvider for FileMaskProvider {
    fn window_mask(&self, id: &str, image: &RasterImage) -> Result<LayoutMask, AugmentError> {
        let path = self.dir.join(format!("{id}.png"));
        if !path.is_file() {
            return Err(AugmentError::MaskNotFound {
                id: id.to_string(),
                dir: self.dir.display().to_string(),
            });
        }
        let mask = LayoutMask::load_png(&path)?;
        if mask.width() != image.width() || mask.height() != image.height() {
            return Err(AugmentError::MaskImageMismatch {
                mask_w: mask.width(),
                mask_h: mask.height(),
                img_w: image.width(),
                img_h: image.height(),
            });
        }
        Ok(mask)
    }
}
