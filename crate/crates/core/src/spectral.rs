//! 2D discrete Fourier transform at the exact image dimensions.
//!
//! Forward transforms are unnormalized; the inverse carries the `1 / (N M)`
//! factor. Coefficient `(u, v)` is stored at `u * width + v`, with `u` the
//! row (vertical) frequency index and `v` the column index.

use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::{Error, GrayImage, Result};

/// Largest imaginary residue tolerated when inverting a spectrum that is
/// expected to come from a real image.
pub const REAL_RESIDUE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    width: usize,
    height: usize,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(width: usize, height: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if width == 0 || height == 0 || coeffs.len() != width * height {
            return Err(Error::Dimension(format!(
                "{width}x{height} spectrum needs {} coefficients, got {}",
                width * height,
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Numeric("non-finite spectral coefficient".into()));
        }
        Ok(Self {
            width,
            height,
            coeffs,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Complex64 {
        self.coeffs[u * self.width + v]
    }
}

/// Maps an FFT bin index to its signed frequency in `(-n/2, n/2]`.
#[inline]
pub fn signed_frequency(k: usize, n: usize) -> f64 {
    if 2 * k > n {
        k as f64 - n as f64
    } else {
        k as f64
    }
}

pub fn dft2(img: &GrayImage) -> Spectrum {
    let mut coeffs: Vec<Complex64> = img.pixels().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_in_place(img.width(), img.height(), &mut coeffs, FftDirection::Forward);
    Spectrum {
        width: img.width(),
        height: img.height(),
        coeffs,
    }
}

/// Inverse transform of a spectrum of real origin.
///
/// Fails with [`Error::Numeric`] if the imaginary part of the result exceeds
/// [`REAL_RESIDUE_TOLERANCE`] anywhere.
pub fn idft2(spec: &Spectrum) -> Result<GrayImage> {
    let data = inverse_complex(spec);
    let residue = data.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if residue >= REAL_RESIDUE_TOLERANCE {
        return Err(Error::Numeric(format!(
            "inverse transform has imaginary residue {residue:e}"
        )));
    }
    GrayImage::new(spec.width, spec.height, data.iter().map(|c| c.re).collect())
}

/// Inverse transform keeping only the real part, without a residue check.
pub fn idft2_real_part(spec: &Spectrum) -> Result<GrayImage> {
    let data = inverse_complex(spec);
    GrayImage::new(spec.width, spec.height, data.iter().map(|c| c.re).collect())
}

fn inverse_complex(spec: &Spectrum) -> Vec<Complex64> {
    let mut data = spec.coeffs.clone();
    fft2_in_place(spec.width, spec.height, &mut data, FftDirection::Inverse);
    let scale = 1.0 / (spec.width * spec.height) as f64;
    for c in &mut data {
        *c *= scale;
    }
    data
}

/// Unnormalized row-then-column transform of a row-major complex buffer.
pub(crate) fn fft2_in_place(width: usize, height: usize, data: &mut [Complex64], direction: FftDirection) {
    let mut planner = FftPlanner::new();

    let row_fft = planner.plan_fft(width, direction);
    let mut scratch = vec![Complex64::default(); row_fft.get_inplace_scratch_len()];
    for row in data.chunks_exact_mut(width) {
        row_fft.process_with_scratch(row, &mut scratch);
    }

    let col_fft = planner.plan_fft(height, direction);
    scratch.resize(col_fft.get_inplace_scratch_len(), Complex64::default());
    let mut column = vec![Complex64::default(); height];
    for j in 0..width {
        for (i, c) in column.iter_mut().enumerate() {
            *c = data[i * width + j];
        }
        col_fft.process_with_scratch(&mut column, &mut scratch);
        for (i, c) in column.iter().enumerate() {
            data[i * width + j] = *c;
        }
    }
}
