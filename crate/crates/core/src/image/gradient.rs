//! Sobel derivatives and the orientation-style local gradient measure.

use super::GrayImage;
use crate::{Error, Result};

/// Value assigned to the local gradient where both derivatives vanish.
///
/// The ratio `(|fx| + |fy|) / (2 sqrt(fx² + fy²))` is 0/0 there; 0.5 is the
/// infimum of its range, so flat pixels get the largest gradient weight.
pub const ZERO_GRADIENT: f64 = 0.5;

/// Vertical (`fx`, along rows) and horizontal (`fy`, along columns) derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivField {
    width: usize,
    height: usize,
    fx: Vec<f64>,
    fy: Vec<f64>,
}

impl DerivField {
    pub fn new(width: usize, height: usize, fx: Vec<f64>, fy: Vec<f64>) -> Result<Self> {
        let n = width * height;
        if n == 0 || fx.len() != n || fy.len() != n {
            return Err(Error::Dimension(format!(
                "derivative planes must both hold {width}x{height} values"
            )));
        }
        if fx.iter().chain(&fy).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite derivative".into()));
        }
        Ok(Self {
            width,
            height,
            fx,
            fy,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn fx(&self) -> &[f64] {
        &self.fx
    }

    pub fn fy(&self) -> &[f64] {
        &self.fy
    }

    /// Multiplies both planes by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            fx: self.fx.iter().map(|v| v * c).collect(),
            fy: self.fy.iter().map(|v| v * c).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientMap {
    width: usize,
    height: usize,
    g: Vec<f64>,
}

impl GradientMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.g
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.g[row * self.width + col]
    }
}

// Row-major 3x3 masks applied as correlation.
const SOBEL_VERTICAL: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
const SOBEL_HORIZONTAL: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];

/// 3x3 Sobel responses with edge replication at the borders.
pub fn sobel_derivatives(img: &GrayImage) -> Result<DerivField> {
    let (w, h) = img.dimensions();
    if w < 3 || h < 3 {
        return Err(Error::Dimension(format!("Sobel needs at least 3x3, got {w}x{h}")));
    }
    let mut fx = Vec::with_capacity(w * h);
    let mut fy = Vec::with_capacity(w * h);
    for i in 0..h as isize {
        for j in 0..w as isize {
            let mut gx = 0.0;
            let mut gy = 0.0;
            for (a, (row_v, row_h)) in SOBEL_VERTICAL.iter().zip(&SOBEL_HORIZONTAL).enumerate() {
                for b in 0..3 {
                    let v = img.get_clamped(i + a as isize - 1, j + b as isize - 1);
                    gx += row_v[b] * v;
                    gy += row_h[b] * v;
                }
            }
            fx.push(gx);
            fy.push(gy);
        }
    }
    Ok(DerivField {
        width: w,
        height: h,
        fx,
        fy,
    })
}

/// `G = (|fx| + |fy|) / (2 sqrt(fx² + fy²))`, with [`ZERO_GRADIENT`] where
/// both derivatives are exactly zero.
///
/// The ratio depends only on the gradient direction: it is 0.5 along the axes
/// and √2/2 on the diagonals, independent of edge strength.
pub fn local_gradient(deriv: &DerivField) -> GradientMap {
    let g = deriv
        .fx
        .iter()
        .zip(&deriv.fy)
        .map(|(&fx, &fy)| gradient_ratio(fx, fy))
        .collect();
    GradientMap {
        width: deriv.width,
        height: deriv.height,
        g,
    }
}

#[inline]
pub(crate) fn gradient_ratio(fx: f64, fy: f64) -> f64 {
    if fx == 0.0 && fy == 0.0 {
        return ZERO_GRADIENT;
    }
    // hypot avoids overflow/underflow for extreme derivative magnitudes
    let g = (fx.abs() + fy.abs()) / (2.0 * fx.hypot(fy));
    g.clamp(0.5, std::f64::consts::FRAC_1_SQRT_2)
}

/// Edge-strength variant: `(|fx| + |fy|) / (2 max_image sqrt(fx² + fy²))`,
/// clamped to `[0, 1]`. All zeros for a field with no gradient at all.
pub fn normalized_gradient_magnitude(deriv: &DerivField) -> GradientMap {
    let peak = deriv
        .fx
        .iter()
        .zip(&deriv.fy)
        .map(|(fx, fy)| fx.hypot(*fy))
        .fold(0.0, f64::max);
    let g = deriv
        .fx
        .iter()
        .zip(&deriv.fy)
        .map(|(fx, fy)| {
            if peak == 0.0 {
                0.0
            } else {
                ((fx.abs() + fy.abs()) / (2.0 * peak)).clamp(0.0, 1.0)
            }
        })
        .collect();
    GradientMap {
        width: deriv.width,
        height: deriv.height,
        g,
    }
}
