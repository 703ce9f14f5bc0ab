//! Forward observation model: warp, blur, decimate, add noise.
//!
//! Each low-resolution frame is produced from the high-resolution scene as
//! `y_k = D H W_k x + n_k`, the operators being applied right to left.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::spectral::{dft2, idft2_real_part, signed_frequency};
use crate::{Error, GrayImage, Result};

/// Planar subpixel translation in low-resolution pixel units.
///
/// `dx` is vertical (rows), `dy` horizontal (columns). A frame with motion
/// `d` shows the reference content translated by `d`: `moving(p) = ref(p - d)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotionVector {
    pub dx: f64,
    pub dy: f64,
}

impl MotionVector {
    pub const ZERO: MotionVector = MotionVector { dx: 0.0, dy: 0.0 };

    pub fn new(dx: f64, dy: f64) -> Self {
        Self { dx, dy }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self::new(self.dx * factor, self.dy * factor)
    }

    pub fn is_zero(self) -> bool {
        self.dx == 0.0 && self.dy == 0.0
    }

    /// Finite and smaller than a quarter of the smaller image side.
    pub fn check_bounds(self, width: usize, height: usize) -> Result<()> {
        let limit = width.min(height) as f64 / 4.0;
        if !self.dx.is_finite() || !self.dy.is_finite() {
            return Err(Error::invalid("shift", "shift components must be finite"));
        }
        if self.dx.abs() >= limit || self.dy.abs() >= limit {
            return Err(Error::invalid(
                "shift",
                format!(
                    "({}, {}) exceeds the sanity bound {limit} for a {width}x{height} frame",
                    self.dx, self.dy
                ),
            ));
        }
        Ok(())
    }
}

/// Square, odd-sized, non-negative blur kernel with unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct Psf {
    size: usize,
    taps: Vec<f64>,
}

impl Psf {
    pub fn new(size: usize, taps: Vec<f64>) -> Result<Self> {
        if size.is_multiple_of(2) {
            return Err(Error::invalid("psf.size", format!("size {size} must be odd")));
        }
        if taps.len() != size * size {
            return Err(Error::invalid(
                "psf",
                format!("{size}x{size} kernel needs {} taps", size * size),
            ));
        }
        if taps.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::invalid("psf", "taps must be finite and non-negative"));
        }
        let sum: f64 = taps.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("psf", format!("taps sum to {sum}, expected 1")));
        }
        Ok(Self { size, taps })
    }

    pub fn identity() -> Self {
        Self {
            size: 1,
            taps: vec![1.0],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    #[inline]
    pub fn tap(&self, row: usize, col: usize) -> f64 {
        self.taps[row * self.size + col]
    }
}

/// Sampled isotropic Gaussian normalized to unit sum. A `sigma` below 1e-6,
/// including zero, degenerates to the identity (delta) kernel.
pub fn gaussian_psf(size: usize, sigma: f64) -> Result<Psf> {
    if size == 0 || size.is_multiple_of(2) {
        return Err(Error::invalid(
            "psf.size",
            format!("size {size} must be odd and positive"),
        ));
    }
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::invalid(
            "psf.sigma",
            format!("sigma {sigma} must be non-negative"),
        ));
    }
    let r = (size / 2) as isize;
    let mut taps = vec![0.0; size * size];
    if sigma < 1e-6 {
        taps[(size * size) / 2] = 1.0;
    } else {
        let two_s2 = 2.0 * sigma * sigma;
        for a in -r..=r {
            for b in -r..=r {
                taps[((a + r) as usize) * size + (b + r) as usize] =
                    (-((a * a + b * b) as f64) / two_s2).exp();
            }
        }
        let z: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= z);
    }
    Ok(Psf { size, taps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WarpMethod {
    /// Circular shift through the Fourier shift theorem; exact for
    /// band-limited periodic content.
    #[default]
    Fourier,
    /// Bilinear resampling with edge replication.
    Bilinear,
}

impl WarpMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            WarpMethod::Fourier => "fourier",
            WarpMethod::Bilinear => "bilinear",
        }
    }
}

impl std::str::FromStr for WarpMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fourier" => Ok(WarpMethod::Fourier),
            "bilinear" => Ok(WarpMethod::Bilinear),
            other => Err(Error::invalid(
                "warp",
                format!("unknown warp method {other:?} (fourier|bilinear)"),
            )),
        }
    }
}

/// Translates `img` by `mv` (in pixels of `img`): `out(p) = img(p - mv)`.
pub fn warp_shift(img: &GrayImage, mv: MotionVector, method: WarpMethod) -> GrayImage {
    if mv.is_zero() {
        return img.clone();
    }
    match method {
        WarpMethod::Fourier => fourier_shift(img, mv),
        WarpMethod::Bilinear => bilinear_shift(img, mv),
    }
}

/// Per-axis phase factors `exp(-2πi k d / n)`. The Nyquist bin of an even
/// length keeps only the real part so the shifted spectrum stays Hermitian.
fn shift_factors(n: usize, d: f64) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let angle = -2.0 * PI * signed_frequency(k, n) * d / n as f64;
            if 2 * k == n {
                Complex64::new(angle.cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, angle)
            }
        })
        .collect()
}

fn fourier_shift(img: &GrayImage, mv: MotionVector) -> GrayImage {
    let (w, h) = img.dimensions();
    let mut spec = dft2(img);
    let rows = shift_factors(h, mv.dx);
    let cols = shift_factors(w, mv.dy);
    for (u, row) in spec.coeffs_mut().chunks_exact_mut(w).enumerate() {
        for (c, col) in row.iter_mut().zip(&cols) {
            *c *= rows[u] * col;
        }
    }
    idft2_real_part(&spec).expect("phase multiplication keeps coefficients finite")
}

fn bilinear_shift(img: &GrayImage, mv: MotionVector) -> GrayImage {
    let (w, h) = img.dimensions();
    let mut out = Vec::with_capacity(w * h);
    for i in 0..h {
        for j in 0..w {
            out.push(sample_bilinear(img, i as f64 - mv.dx, j as f64 - mv.dy));
        }
    }
    GrayImage::from_raw(w, h, out)
}

/// Bilinear lookup at real coordinates with edge replication.
pub(crate) fn sample_bilinear(img: &GrayImage, y: f64, x: f64) -> f64 {
    let y0 = y.floor();
    let x0 = x.floor();
    let ty = y - y0;
    let tx = x - x0;
    let (r, c) = (y0 as isize, x0 as isize);
    let p00 = img.get_clamped(r, c);
    let p01 = img.get_clamped(r, c + 1);
    let p10 = img.get_clamped(r + 1, c);
    let p11 = img.get_clamped(r + 1, c + 1);
    let top = p00 + (p01 - p00) * tx;
    let bottom = p10 + (p11 - p10) * tx;
    top + (bottom - top) * ty
}

/// 2D correlation with the kernel, edge replication at the borders.
pub fn convolve_psf(img: &GrayImage, psf: &Psf) -> GrayImage {
    let (w, h) = img.dimensions();
    let r = psf.radius() as isize;
    let mut out = Vec::with_capacity(w * h);
    for i in 0..h as isize {
        for j in 0..w as isize {
            let mut acc = 0.0;
            for a in -r..=r {
                for b in -r..=r {
                    acc += psf.tap((a + r) as usize, (b + r) as usize) * img.get_clamped(i + a, j + b);
                }
            }
            out.push(acc);
        }
    }
    GrayImage::from_raw(w, h, out)
}

/// Point sampling: `out(i, j) = img(i * ratio, j * ratio)`.
pub fn decimate(img: &GrayImage, ratio: usize) -> Result<GrayImage> {
    let (w, h) = img.dimensions();
    if ratio == 0 || w % ratio != 0 || h % ratio != 0 {
        return Err(Error::Dimension(format!("ratio {ratio} does not divide {w}x{h}")));
    }
    let (lw, lh) = (w / ratio, h / ratio);
    let mut out = Vec::with_capacity(lw * lh);
    for i in 0..lh {
        for j in 0..lw {
            out.push(img.get(i * ratio, j * ratio));
        }
    }
    Ok(GrayImage::from_raw(lw, lh, out))
}

/// Adds zero-mean Gaussian noise with variance `var(img) / 10^(bsnr_db / 10)`.
///
/// `bsnr_db = +inf` means no noise and returns the input unchanged.
pub fn add_noise_bsnr(img: &GrayImage, bsnr_db: f64, seed: u64) -> Result<GrayImage> {
    if bsnr_db == f64::INFINITY {
        return Ok(img.clone());
    }
    if !bsnr_db.is_finite() {
        return Err(Error::invalid(
            "bsnr_db",
            format!("{bsnr_db} is not a valid BSNR"),
        ));
    }
    let var = img.variance();
    if var <= 0.0 {
        return Err(Error::DegenerateInput(
            "BSNR is undefined for a zero-variance image".into(),
        ));
    }
    let sigma = (var / 10f64.powf(bsnr_db / 10.0)).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Numeric(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    img.map(|v| v + normal.sample(&mut rng))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSpec {
    /// True motion in low-resolution pixel units.
    pub shift: MotionVector,
    /// `None` disables noise for this frame.
    pub bsnr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegradationConfig {
    pub ratio: usize,
    pub psf: Psf,
    pub frames: Vec<FrameSpec>,
    /// Frame `k` draws its noise from `seed + k`.
    pub seed: u64,
    pub warp_method: WarpMethod,
}

impl DegradationConfig {
    /// Four-frame 2:1 protocol: shifts (0,0), (0,-0.8), (-0.8,-0.8), (-0.8,0)
    /// at BSNR 30, 25, 35 and 30 dB, blurred by the default 5x5, σ=1 Gaussian.
    pub fn standard_preset(seed: u64) -> Self {
        let frames = [
            (0.0, 0.0, 30.0),
            (0.0, -0.8, 25.0),
            (-0.8, -0.8, 35.0),
            (-0.8, 0.0, 30.0),
        ]
        .into_iter()
        .map(|(dx, dy, bsnr)| FrameSpec {
            shift: MotionVector::new(dx, dy),
            bsnr_db: Some(bsnr),
        })
        .collect();
        Self {
            ratio: 2,
            psf: gaussian_psf(5, 1.0).expect("default PSF parameters are valid"),
            frames,
            seed,
            warp_method: WarpMethod::Fourier,
        }
    }

    pub fn validate(&self, hr_width: usize, hr_height: usize) -> Result<()> {
        if self.ratio < 2 {
            return Err(Error::invalid(
                "ratio",
                format!("ratio {} must be at least 2", self.ratio),
            ));
        }
        if !hr_width.is_multiple_of(self.ratio) || !hr_height.is_multiple_of(self.ratio) {
            return Err(Error::invalid(
                "ratio",
                format!("ratio {} does not divide {hr_width}x{hr_height}", self.ratio),
            ));
        }
        let first = self
            .frames
            .first()
            .ok_or_else(|| Error::invalid("frames", "at least one frame is required"))?;
        if !first.shift.is_zero() {
            return Err(Error::invalid(
                "frames",
                "the reference frame 0 must have shift (0, 0)",
            ));
        }
        let (lw, lh) = (hr_width / self.ratio, hr_height / self.ratio);
        for (k, f) in self.frames.iter().enumerate() {
            f.shift
                .check_bounds(lw, lh)
                .map_err(|e| Error::invalid("frames", format!("frame {k}: {e}")))?;
            if let Some(b) = f.bsnr_db {
                if b.is_nan() || b == f64::NEG_INFINITY {
                    return Err(Error::invalid("frames", format!("frame {k}: invalid BSNR {b}")));
                }
            }
        }
        Ok(())
    }

    /// Mean of the configured BSNR values, ignoring noiseless frames.
    pub fn mean_bsnr_db(&self) -> Option<f64> {
        let vals: Vec<f64> = self
            .frames
            .iter()
            .filter_map(|f| f.bsnr_db)
            .filter(|b| b.is_finite())
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LRFrame {
    pub image: GrayImage,
    pub true_shift: MotionVector,
    pub bsnr_db: Option<f64>,
}

/// Produces one low-resolution frame per configured frame. Frames are
/// independent and may be computed in parallel; results do not depend on the
/// thread count.
pub fn simulate_sequence(hr: &GrayImage, cfg: &DegradationConfig) -> Result<Vec<LRFrame>> {
    cfg.validate(hr.width(), hr.height())?;
    cfg.frames
        .par_iter()
        .enumerate()
        .map(|(k, f)| {
            let warped = warp_shift(hr, f.shift.scaled(cfg.ratio as f64), cfg.warp_method);
            let blurred = convolve_psf(&warped, &cfg.psf);
            let low = decimate(&blurred, cfg.ratio)?;
            let image = match f.bsnr_db {
                Some(b) => add_noise_bsnr(&low, b, cfg.seed.wrapping_add(k as u64))?,
                None => low,
            };
            Ok(LRFrame {
                image,
                true_shift: f.shift,
                bsnr_db: f.bsnr_db,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn textured(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |i, j| ((i * 37 + j * 91 + i * j * 7) % 256) as f64).unwrap()
    }

    #[test]
    fn zero_shift_is_identity() {
        let img = textured(8, 6);
        for m in [WarpMethod::Fourier, WarpMethod::Bilinear] {
            assert_eq!(warp_shift(&img, MotionVector::ZERO, m), img);
        }
    }

    #[test]
    fn integer_fourier_shift_is_circular_permutation() {
        let img = textured(8, 6);
        let out = warp_shift(&img, MotionVector::new(1.0, 0.0), WarpMethod::Fourier);
        for i in 0..6 {
            for j in 0..8 {
                assert!((out.get(i, j) - img.get((i + 5) % 6, j)).abs() < 1e-9);
            }
        }
        let out = warp_shift(&img, MotionVector::new(0.0, -3.0), WarpMethod::Fourier);
        for i in 0..6 {
            for j in 0..8 {
                assert!((out.get(i, j) - img.get(i, (j + 3) % 8)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn half_pixel_fourier_shift_of_sinusoid() {
        // Row profile cos(2π k i / N) shifted by 0.5 equals cos(2π k (i - 0.5) / N),
        // i.e. a phase change of π k / N.
        let (n, k) = (16usize, 3.0);
        let img = GrayImage::from_fn(4, n, |i, _| (2.0 * PI * k * i as f64 / n as f64).cos()).unwrap();
        let out = warp_shift(&img, MotionVector::new(0.5, 0.0), WarpMethod::Fourier);
        for i in 0..n {
            let expected = (2.0 * PI * k * i as f64 / n as f64 - PI * k / n as f64).cos();
            for j in 0..4 {
                assert!((out.get(i, j) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bilinear_shift_interpolates_with_replication() {
        let img = GrayImage::from_fn(4, 1, |_, j| (10 * j) as f64).unwrap();
        let out = warp_shift(&img, MotionVector::new(0.0, 0.5), WarpMethod::Bilinear);
        assert_eq!(out.pixels(), &[0.0, 5.0, 15.0, 25.0]);
    }

    #[test]
    fn gaussian_psf_cases() {
        assert_eq!(gaussian_psf(1, 3.0).unwrap().taps(), &[1.0]);
        let delta = gaussian_psf(3, 1e-9).unwrap();
        assert_eq!(delta.taps(), &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(gaussian_psf(4, 1.0).is_err());
        assert_eq!(gaussian_psf(3, 0.0).unwrap(), delta);
        assert!(gaussian_psf(3, -1.0).is_err());

        // exp(-r²/2): corner e^-1, edge e^-1/2, centre 1
        let p = gaussian_psf(3, 1.0).unwrap();
        let z = 1.0 + 4.0 * (-0.5f64).exp() + 4.0 * (-1.0f64).exp();
        assert!((p.tap(1, 1) - 1.0 / z).abs() < 1e-15);
        assert!((p.tap(0, 1) - (-0.5f64).exp() / z).abs() < 1e-15);
        assert!((p.tap(0, 0) - (-1.0f64).exp() / z).abs() < 1e-15);
        assert!((p.taps().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(p.tap(a, b), p.tap(b, a));
                assert_eq!(p.tap(a, b), p.tap(2 - a, b));
                assert_eq!(p.tap(a, b), p.tap(2 - b, a));
            }
        }
    }

    #[test]
    fn psf_validation() {
        assert!(Psf::new(2, vec![0.25; 4]).is_err());
        assert!(Psf::new(1, vec![0.5]).is_err());
        assert!(Psf::new(3, vec![-0.5, 0.0, 0.0, 0.0, 1.5, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn convolution_identity_and_dc() {
        let img = textured(7, 5);
        assert_eq!(convolve_psf(&img, &Psf::identity()), img);
        let c = GrayImage::filled(7, 5, 17.0).unwrap();
        let out = convolve_psf(&c, &gaussian_psf(5, 1.3).unwrap());
        assert!(out.pixels().iter().all(|v| (v - 17.0).abs() < 1e-12));
    }

    #[test]
    fn convolution_matches_naive_loop() {
        let img = GrayImage::new(5, 5, (0..25).map(|k| ((k * 7919) % 101) as f64).collect()).unwrap();
        let psf = gaussian_psf(3, 0.8).unwrap();
        let out = convolve_psf(&img, &psf);
        for i in 0..5usize {
            for j in 0..5usize {
                let mut acc = 0.0;
                for a in 0..3usize {
                    for b in 0..3usize {
                        let r = (i + a).saturating_sub(1).min(4);
                        let c = (j + b).saturating_sub(1).min(4);
                        acc += psf.tap(a, b) * img.get(r, c);
                    }
                }
                assert!((out.get(i, j) - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decimation() {
        let img = GrayImage::from_fn(4, 4, |i, j| (10 * i + j) as f64).unwrap();
        assert_eq!(decimate(&img, 1).unwrap(), img);
        assert_eq!(decimate(&img, 2).unwrap().pixels(), &[0.0, 2.0, 20.0, 22.0]);
        assert!(matches!(decimate(&img, 3), Err(Error::Dimension(_))));
        let c = GrayImage::filled(6, 6, 3.0).unwrap();
        assert!(decimate(&c, 3).unwrap().pixels().iter().all(|&v| v == 3.0));
    }

    #[test]
    fn noise_cases() {
        let img = textured(32, 32);
        assert_eq!(add_noise_bsnr(&img, f64::INFINITY, 1).unwrap(), img);
        assert_eq!(
            add_noise_bsnr(&img, 20.0, 9).unwrap(),
            add_noise_bsnr(&img, 20.0, 9).unwrap()
        );
        assert_ne!(
            add_noise_bsnr(&img, 20.0, 9).unwrap(),
            add_noise_bsnr(&img, 20.0, 10).unwrap()
        );
        let flat = GrayImage::filled(8, 8, 1.0).unwrap();
        assert!(matches!(
            add_noise_bsnr(&flat, 30.0, 0),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn realized_bsnr_within_five_percent() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let img = GrayImage::new(
            256,
            256,
            (0..256 * 256).map(|_| rng.random_range(0.0..255.0)).collect(),
        )
        .unwrap();
        let noisy = add_noise_bsnr(&img, 30.0, 5).unwrap();
        let diff: Vec<f64> = noisy
            .pixels()
            .iter()
            .zip(img.pixels())
            .map(|(a, b)| a - b)
            .collect();
        let realized = GrayImage::new(256, 256, diff).unwrap().variance();
        let target = img.variance() / 1000.0;
        assert!((realized / target - 1.0).abs() < 0.05, "{realized} vs {target}");
    }

    #[test]
    fn config_validation() {
        let mut cfg = DegradationConfig::standard_preset(0);
        assert!(cfg.validate(256, 256).is_ok());
        assert!(matches!(
            cfg.validate(255, 256),
            Err(Error::InvalidArgument { name: "ratio", .. })
        ));
        cfg.frames[0].shift = MotionVector::new(0.1, 0.0);
        assert!(matches!(
            cfg.validate(256, 256),
            Err(Error::InvalidArgument { name: "frames", .. })
        ));
        cfg.frames.clear();
        assert!(cfg.validate(256, 256).is_err());
        let mut cfg = DegradationConfig::standard_preset(0);
        cfg.frames[1].shift = MotionVector::new(0.0, 40.0);
        assert!(cfg.validate(256, 256).is_err());
        assert_eq!(DegradationConfig::standard_preset(0).mean_bsnr_db(), Some(30.0));
    }

    #[test]
    fn noiseless_single_frame_is_point_decimation() {
        let hr = textured(16, 12);
        let cfg = DegradationConfig {
            ratio: 2,
            psf: Psf::identity(),
            frames: vec![FrameSpec {
                shift: MotionVector::ZERO,
                bsnr_db: None,
            }],
            seed: 3,
            warp_method: WarpMethod::Fourier,
        };
        let frames = simulate_sequence(&hr, &cfg).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].image, decimate(&hr, 2).unwrap());
    }

    proptest! {
        #[test]
        fn fourier_shift_preserves_mean(dx in -3.0f64..3.0, dy in -3.0f64..3.0) {
            let img = textured(12, 10);
            let out = warp_shift(&img, MotionVector::new(dx, dy), WarpMethod::Fourier);
            prop_assert!((out.mean() - img.mean()).abs() < 1e-9);
        }
    }
}
