//! PSNR and mean SSIM against a reference image, plus CSV report emission.

use std::fmt::Write as _;

use crate::{Error, GrayImage, Result};

pub const PEAK: f64 = 255.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = (0.01 * PEAK) * (0.01 * PEAK);
pub const SSIM_C2: f64 = (0.03 * PEAK) * (0.03 * PEAK);

fn check_same_size(reference: &GrayImage, test: &GrayImage) -> Result<()> {
    if reference.dimensions() != test.dimensions() {
        return Err(Error::Dimension(format!(
            "reference is {}x{}, test is {}x{}",
            reference.width(),
            reference.height(),
            test.width(),
            test.height()
        )));
    }
    Ok(())
}

/// Mean squared error over the interior left after removing `border_exclude`
/// pixels on every side.
pub fn mse(reference: &GrayImage, test: &GrayImage, border_exclude: usize) -> Result<f64> {
    check_same_size(reference, test)?;
    let a = reference.crop_border(border_exclude)?;
    let b = test.crop_border(border_exclude)?;
    let n = a.pixels().len() as f64;
    Ok(a.pixels()
        .iter()
        .zip(b.pixels())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / n)
}

/// `10 log10(255² / MSE)` in dB; `+inf` for identical interiors.
pub fn psnr(reference: &GrayImage, test: &GrayImage, border_exclude: usize) -> Result<f64> {
    let e = mse(reference, test, border_exclude)?;
    Ok(if e == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK * PEAK / e).log10()
    })
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut g = [0.0; SSIM_WINDOW];
    let r = (SSIM_WINDOW / 2) as f64;
    for (k, v) in g.iter_mut().enumerate() {
        let d = k as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= s);
    g
}

/// Separable "valid" filtering with the 1D Gaussian `g` on rows then columns.
fn filter_valid(data: &[f64], w: usize, h: usize, g: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = g.len();
    let ow = w - n + 1;
    let oh = h - n + 1;
    let mut rows = vec![0.0; ow * h];
    for i in 0..h {
        let src = &data[i * w..(i + 1) * w];
        for j in 0..ow {
            rows[i * ow + j] = g.iter().zip(&src[j..j + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for i in 0..oh {
        for j in 0..ow {
            out[i * ow + j] = (0..n).map(|k| g[k] * rows[(i + k) * ow + j]).sum();
        }
    }
    (out, ow, oh)
}

/// SSIM map over every fully contained 11x11 Gaussian window (σ = 1.5).
pub fn ssim_map(reference: &GrayImage, test: &GrayImage) -> Result<GrayImage> {
    check_same_size(reference, test)?;
    let (w, h) = reference.dimensions();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Dimension(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let g = gaussian_window();
    let x = reference.pixels();
    let y = test.pixels();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();

    let (mu_x, ow, oh) = filter_valid(x, w, h, &g);
    let (mu_y, _, _) = filter_valid(y, w, h, &g);
    let (e_xx, _, _) = filter_valid(&xx, w, h, &g);
    let (e_yy, _, _) = filter_valid(&yy, w, h, &g);
    let (e_xy, _, _) = filter_valid(&xy, w, h, &g);

    let map = (0..ow * oh)
        .map(|k| {
            let (mx, my) = (mu_x[k], mu_y[k]);
            let sx = e_xx[k] - mx * mx;
            let sy = e_yy[k] - my * my;
            let sxy = e_xy[k] - mx * my;
            ((2.0 * mx * my + SSIM_C1) * (2.0 * sxy + SSIM_C2))
                / ((mx * mx + my * my + SSIM_C1) * (sx + sy + SSIM_C2))
        })
        .collect();
    GrayImage::new(ow, oh, map)
}

/// Mean of [`ssim_map`].
pub fn mssim(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    Ok(ssim_map(reference, test)?.mean())
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityRow {
    pub image: String,
    pub method: String,
    pub psnr_db: f64,
    pub mssim: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QualityReport {
    pub rows: Vec<QualityRow>,
}

impl QualityReport {
    pub const HEADER: &'static str = "image,method,psnr_db,mssim";

    pub fn push(&mut self, image: impl Into<String>, method: impl Into<String>, psnr_db: f64, mssim: f64) {
        self.rows.push(QualityRow {
            image: image.into(),
            method: method.into(),
            psnr_db,
            mssim,
        });
    }

    /// CSV with a header line and four decimals per value; infinite PSNR is
    /// written as `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for r in &self.rows {
            let psnr = if r.psnr_db.is_infinite() {
                "inf".to_string()
            } else {
                format!("{:.4}", r.psnr_db)
            };
            let _ = writeln!(out, "{},{},{},{:.4}", r.image, r.method, psnr, r.mssim);
        }
        out
    }
}
