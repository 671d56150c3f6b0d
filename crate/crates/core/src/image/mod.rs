//! Raster images with unit-interval intensities, PGM/PPM I/O and the
//! preprocessing transforms applied to every sample (grayscale, quarter-turn
//! rotation, bounding-box crop, bilinear resize).
//!
//! All operations are pure functions returning new images.

mod pnm;
mod transform;

pub use pnm::{load_image, save_image, decode_pnm, encode_pnm, quantize};
pub use transform::{bounding_box_crop, crop_bounds, resize_bilinear, rotate90, to_grayscale, DEFAULT_CROP_THRESHOLD};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("invalid image: {0}")]
    Invalid(String),
    #[error("malformed PNM header: {0}")]
    MalformedHeader(String),
    #[error("truncated PNM payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("unsupported PNM max value {0} (only 255 is supported)")]
    UnsupportedMaxValue(u32),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Row-major, channel-interleaved raster. Intensities live in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<f64>) -> Result<Self, ImageError> {
        if height == 0 || width == 0 {
            return Err(ImageError::Invalid(format!("empty dimensions {height}x{width}")));
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::Invalid(format!("unsupported channel count {channels}")));
        }
        if pixels.len() != height * width * channels {
            return Err(ImageError::Invalid(format!(
                "buffer length {} does not match {height}x{width}x{channels}",
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(ImageError::Invalid(format!("intensity {bad} outside [0,1]")));
        }
        Ok(Self { height, width, channels, pixels })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self, ImageError> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    /// Builds an image from a closure over `(row, col, channel)`; values are clamped to `[0,1]`.
    pub fn from_fn(height: usize, width: usize, channels: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0 && (channels == 1 || channels == 3));
        let mut pixels = Vec::with_capacity(height * width * channels);
        for r in 0..height {
            for c in 0..width {
                for ch in 0..channels {
                    let v = f(r, c, ch);
                    pixels.push(if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) });
                }
            }
        }
        Self { height, width, channels, pixels }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.pixels[(row * self.width + col) * self.channels + channel]
    }

    /// Luminance of one pixel (the pixel itself for grayscale).
    #[inline]
    pub fn luminance(&self, row: usize, col: usize) -> f64 {
        if self.channels == 1 {
            self.get(row, col, 0)
        } else {
            let base = (row * self.width + col) * 3;
            transform::luma(self.pixels[base], self.pixels[base + 1], self.pixels[base + 2])
        }
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }
}
