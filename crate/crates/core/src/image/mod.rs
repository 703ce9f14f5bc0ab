//! Grayscale image container, PGM I/O and Sobel-based local gradients.
//!
//! Pixel coordinates are `(i, j) = (row, column)` with the origin at the top
//! left. Intensities are `f64` with a nominal range of `[0, 255]`; values are
//! only quantized when written to disk.

mod gradient;
mod pgm;

pub use gradient::{
    local_gradient, normalized_gradient_magnitude, sobel_derivatives, DerivField, GradientMap, ZERO_GRADIENT,
};
pub use pgm::{load_pgm, read_pgm_file, save_pgm, write_pgm_file};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    /// Wraps a row-major pixel buffer. Fails on empty dimensions, a length
    /// mismatch or any non-finite intensity.
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "image must be at least 1x1, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::Dimension(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(pos) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite intensity at row {}, column {}",
                pos / width,
                pos % width
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds an image by evaluating `f(row, col)` for every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for i in 0..height {
            for j in 0..width {
                pixels.push(f(i, j));
            }
        }
        Self::new(width, height, pixels)
    }

    /// Internal constructor for buffers produced by our own arithmetic.
    /// Dimensions are trusted; finiteness is still checked in debug builds.
    pub(crate) fn from_raw(width: usize, height: usize, pixels: Vec<f64>) -> Self {
        debug_assert_eq!(pixels.len(), width * height);
        debug_assert!(pixels.iter().all(|v| v.is_finite()));
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    /// Pixel lookup with edge replication for out-of-range coordinates.
    #[inline]
    pub fn get_clamped(&self, row: isize, col: isize) -> f64 {
        let r = row.clamp(0, self.height as isize - 1) as usize;
        let c = col.clamp(0, self.width as isize - 1) as usize;
        self.pixels[r * self.width + c]
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.pixels.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn transpose(&self) -> Self {
        let mut out = Vec::with_capacity(self.pixels.len());
        for j in 0..self.width {
            for i in 0..self.height {
                out.push(self.get(i, j));
            }
        }
        Self::from_raw(self.height, self.width, out)
    }

    /// Removes `border` pixels from every side.
    pub fn crop_border(&self, border: usize) -> Result<Self> {
        if 2 * border >= self.width || 2 * border >= self.height {
            return Err(Error::Dimension(format!(
                "border {border} leaves no interior in a {}x{} image",
                self.width, self.height
            )));
        }
        let w = self.width - 2 * border;
        let h = self.height - 2 * border;
        let mut out = Vec::with_capacity(w * h);
        for i in border..border + h {
            let start = i * self.width + border;
            out.extend_from_slice(&self.pixels[start..start + w]);
        }
        Ok(Self::from_raw(w, h, out))
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.pixels.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / self.pixels.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}
