//! Single-frame bilinear upscaling used as the comparison baseline.

use crate::degrade::sample_bilinear;
use crate::{Error, GrayImage, Result};

/// Upscales by an integer `ratio`. Output pixel `(i, j)` samples the input
/// at `(i / ratio, j / ratio)`, so output `(0, 0)` is aligned with input
/// `(0, 0)`; beyond the last input sample the edge is replicated.
pub fn bilinear_upscale(img: &GrayImage, ratio: usize) -> Result<GrayImage> {
    if ratio == 0 {
        return Err(Error::invalid("ratio", "must be at least 1"));
    }
    if ratio == 1 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width() * ratio, img.height() * ratio);
    let r = ratio as f64;
    let mut out = Vec::with_capacity(w * h);
    for i in 0..h {
        for j in 0..w {
            out.push(sample_bilinear(img, i as f64 / r, j as f64 / r));
        }
    }
    GrayImage::new(w, h, out)
}
