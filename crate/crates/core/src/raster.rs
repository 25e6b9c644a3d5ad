//! RGB pixel buffers and the resampling primitives shared by the panorama
//! and augmentation stages.

use std::path::Path;

use thiserror::Error;

/// Channels per pixel; everything in the pipeline is 8-bit RGB.
pub const CHANNELS: usize = 3;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("buffer length {got} does not match {width}x{height}x{channels}")]
    BadBufferLength {
        width: usize,
        height: usize,
        channels: usize,
        got: usize,
    },
    #[error("image must be non-empty")]
    EmptyImage,
    #[error("failed to read {path}: {source}")]
    Read {
        path: String,
        source: image::ImageError,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: String,
        source: image::ImageError,
    },
}

/// Row-major 8-bit RGB image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RasterImage {
    /// Black image of the given size.
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height * CHANNELS],
        }
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self { width, height, data }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self, RasterError> {
        if data.len() != width * height * CHANNELS {
            return Err(RasterError::BadBufferLength {
                width,
                height,
                channels: CHANNELS,
                got: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * self.width + col) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let i = (row * self.width + col) * CHANNELS;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn load_png(path: &Path) -> Result<Self, RasterError> {
        let img = image::open(path)
            .map_err(|source| RasterError::Read {
                path: path.display().to_string(),
                source,
            })?
            .into_rgb8();
        let (w, h) = img.dimensions();
        Ok(Self {
            width: w as usize,
            height: h as usize,
            data: img.into_raw(),
        })
    }

    pub fn save_png(&self, path: &Path) -> Result<(), RasterError> {
        let buf: image::RgbImage =
            image::ImageBuffer::from_raw(self.width as u32, self.height as u32, self.data.clone())
                .expect("buffer length invariant");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| RasterError::Write {
                path: path.display().to_string(),
                source,
            })
    }
}

/// Bilinear resize with pixel-center alignment.
pub fn resize_bilinear(src: &RasterImage, new_width: usize, new_height: usize) -> RasterImage {
    if src.width() == new_width && src.height() == new_height {
        return src.clone();
    }
    let mut out = RasterImage::new(new_width, new_height);
    let sx = src.width() as f64 / new_width as f64;
    let sy = src.height() as f64 / new_height as f64;
    for r in 0..new_height {
        let fy = ((r as f64 + 0.5) * sy - 0.5).clamp(0.0, (src.height() - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(src.height() - 1);
        let wy = fy - y0 as f64;
        for c in 0..new_width {
            let fx = ((c as f64 + 0.5) * sx - 0.5).clamp(0.0, (src.width() - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(src.width() - 1);
            let wx = fx - x0 as f64;
            let mut rgb = [0u8; 3];
            for (ch, o) in rgb.iter_mut().enumerate() {
                let p00 = src.pixel(y0, x0)[ch] as f64;
                let p01 = src.pixel(y0, x1)[ch] as f64;
                let p10 = src.pixel(y1, x0)[ch] as f64;
                let p11 = src.pixel(y1, x1)[ch] as f64;
                let top = p00 + (p01 - p00) * wx;
                let bot = p10 + (p11 - p10) * wx;
                *o = (top + (bot - top) * wy).round().clamp(0.0, 255.0) as u8;
            }
            out.set_pixel(r, c, rgb);
        }
    }
    out
}

/// Rec. 601 luma in `[0, 1]`, row-major.
pub fn to_grayscale(src: &RasterImage) -> Vec<f64> {
    src.data()
        .chunks_exact(CHANNELS)
        .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0)
        .collect()
}

/// Bilinear resize of a single-channel f64 plane, pixel-center aligned.
pub fn resize_bilinear_gray(
    src: &[f64],
    width: usize,
    height: usize,
    new_width: usize,
    new_height: usize,
) -> Vec<f64> {
    assert_eq!(src.len(), width * height);
    let mut out = vec![0.0; new_width * new_height];
    let sx = width as f64 / new_width as f64;
    let sy = height as f64 / new_height as f64;
    for r in 0..new_height {
        let fy = ((r as f64 + 0.5) * sy - 0.5).clamp(0.0, (height - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(height - 1);
        let wy = fy - y0 as f64;
        for c in 0..new_width {
            let fx = ((c as f64 + 0.5) * sx - 0.5).clamp(0.0, (width - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(width - 1);
            let wx = fx - x0 as f64;
            let top = src[y0 * width + x0] + (src[y0 * width + x1] - src[y0 * width + x0]) * wx;
            let bot = src[y1 * width + x0] + (src[y1 * width + x1] - src[y1 * width + x0]) * wx;
            out[r * new_width + c] = top + (bot - top) * wy;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_buffer_length_checked() {
        assert!(RasterImage::from_raw(2, 2, vec![0; 12]).is_ok());
        assert!(RasterImage::from_raw(2, 2, vec![0; 11]).is_err());
    }

    #[test]
    fn pixel_roundtrip() {
        let mut img = RasterImage::new(4, 3);
        img.set_pixel(2, 1, [10, 20, 30]);
        assert_eq!(img.pixel(2, 1), [10, 20, 30]);
        assert_eq!(img.pixel(0, 0), [0, 0, 0]);
    }

    #[test]
    fn resize_constant_stays_constant() {
        let img = RasterImage::filled(17, 9, [40, 90, 200]);
        let out = resize_bilinear(&img, 64, 64);
        assert!(out.data().chunks_exact(3).all(|p| p == [40, 90, 200]));
    }

    #[test]
    fn resize_identity_is_exact() {
        let mut img = RasterImage::new(5, 5);
        img.set_pixel(3, 2, [7, 8, 9]);
        assert_eq!(resize_bilinear(&img, 5, 5), img);
    }

    #[test]
    fn png_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        let mut img = RasterImage::new(6, 4);
        for r in 0..4 {
            for c in 0..6 {
                img.set_pixel(r, c, [r as u8 * 10, c as u8 * 10, 255]);
            }
        }
        img.save_png(&path).unwrap();
        assert_eq!(RasterImage::load_png(&path).unwrap(), img);
    }

    #[test]
    fn grayscale_range() {
        let img = RasterImage::filled(2, 2, [255, 255, 255]);
        let g = to_grayscale(&img);
        assert!(g.iter().all(|&v| (v - 1.0).abs() < 1e-9));
    }
}
