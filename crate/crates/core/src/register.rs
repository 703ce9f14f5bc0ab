//! Frequency-domain subpixel translation estimation.
//!
//! A translation by `d` multiplies the spectrum by `exp(-2πi(u dx/N + v dy/M))`,
//! so the phase of the cross-power spectrum `F_moving · conj(F_reference)` is a
//! plane through the origin whose slopes are the shift. The estimator
//!
//! 1. takes the integer part from the peak of the phase-correlation surface,
//! 2. removes it from the cross-power spectrum so the remaining phase stays
//!    inside `(-π, π]` over the fitting band,
//! 3. least-squares fits the plane over a low-frequency band, using only
//!    coefficients whose magnitude clears a percentile threshold.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftDirection;
use std::f64::consts::PI;

use crate::degrade::MotionVector;
use crate::spectral::{dft2, fft2_in_place, signed_frequency};
use crate::{Error, GrayImage, Result};

pub const MIN_REGISTRATION_SIDE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationParams {
    /// Fitting band as a fraction of Nyquist along each axis.
    pub band_fraction: f64,
    /// Coefficients below this magnitude percentile of the band are ignored.
    pub magnitude_percentile: f64,
    /// RMS phase residual (radians) above which an estimate is rejected.
    pub max_residual_rad: f64,
    /// Return estimates even when the residual check fails.
    pub allow_low_confidence: bool,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        Self {
            band_fraction: 0.5,
            magnitude_percentile: 0.25,
            max_residual_rad: 1.0,
            allow_low_confidence: false,
        }
    }
}

impl RegistrationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.band_fraction > 0.0 && self.band_fraction <= 1.0) {
            return Err(Error::invalid("band_fraction", "must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.magnitude_percentile) {
            return Err(Error::invalid("magnitude_percentile", "must lie in [0, 1)"));
        }
        if self.max_residual_rad.is_nan() || self.max_residual_rad <= 0.0 {
            return Err(Error::invalid("max_residual_rad", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftEstimate {
    pub shift: MotionVector,
    /// RMS of the phase-plane fit residual, in radians.
    pub residual_rms: f64,
    /// Number of spectral coefficients used in the fit.
    pub used_coefficients: usize,
}

/// Estimates `d` such that `warp_shift(reference, d, Fourier) ≈ moving`.
pub fn estimate_shift(
    reference: &GrayImage,
    moving: &GrayImage,
    params: &RegistrationParams,
) -> Result<MotionVector> {
    let est = estimate_shift_detailed(reference, moving, params)?;
    if est.residual_rms > params.max_residual_rad && !params.allow_low_confidence {
        return Err(Error::LowConfidence {
            residual: est.residual_rms,
            threshold: params.max_residual_rad,
        });
    }
    Ok(est.shift)
}

/// Like [`estimate_shift`] but never rejects on the residual; the caller gets
/// the fit quality alongside the shift.
pub fn estimate_shift_detailed(
    reference: &GrayImage,
    moving: &GrayImage,
    params: &RegistrationParams,
) -> Result<ShiftEstimate> {
    params.validate()?;
    if reference.dimensions() != moving.dimensions() {
        return Err(Error::Dimension(format!(
            "reference is {}x{} but moving frame is {}x{}",
            reference.width(),
            reference.height(),
            moving.width(),
            moving.height()
        )));
    }
    let (w, h) = reference.dimensions();
    if w < MIN_REGISTRATION_SIDE || h < MIN_REGISTRATION_SIDE {
        return Err(Error::Dimension(format!(
            "registration needs at least {MIN_REGISTRATION_SIDE}x{MIN_REGISTRATION_SIDE}, got {w}x{h}"
        )));
    }
    if reference.variance() <= 0.0 || moving.variance() <= 0.0 {
        return Err(Error::DegenerateInput("cannot register a constant image".into()));
    }

    let f_ref = dft2(reference);
    let f_mov = dft2(moving);
    let cross: Vec<Complex64> = f_mov
        .coeffs()
        .iter()
        .zip(f_ref.coeffs())
        .map(|(m, r)| m * r.conj())
        .collect();

    let (mut int_dx, mut int_dy) = correlation_peak(&cross, w, h);
    let band = FitBand::new(&cross, w, h, params);
    if band.entries.len() < 2 {
        return Err(Error::DegenerateInput(
            "too few usable coefficients in the registration band".into(),
        ));
    }

    // Re-centre on the nearest integer when the fractional part of the fit
    // comes out beyond half a pixel (an off-by-one correlation peak).
    let mut fit = band.fit(int_dx, int_dy)?;
    for _ in 0..3 {
        let (sx, sy) = (fit.0.round(), fit.1.round());
        if sx == 0.0 && sy == 0.0 {
            break;
        }
        int_dx += sx;
        int_dy += sy;
        fit = band.fit(int_dx, int_dy)?;
    }
    let (frac_dx, frac_dy, residual_rms) = fit;
    Ok(ShiftEstimate {
        shift: MotionVector::new(int_dx + frac_dx, int_dy + frac_dy),
        residual_rms,
        used_coefficients: band.entries.len(),
    })
}

/// Integer translation at the maximum of the phase-correlation surface.
fn correlation_peak(cross: &[Complex64], w: usize, h: usize) -> (f64, f64) {
    let mut surface: Vec<Complex64> = cross
        .iter()
        .map(|c| {
            let n = c.norm();
            if n > 1e-12 {
                c / n
            } else {
                Complex64::default()
            }
        })
        .collect();
    fft2_in_place(w, h, &mut surface, FftDirection::Inverse);
    let (best, _) = surface
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (k, c)| {
            if c.re > bv {
                (k, c.re)
            } else {
                (bi, bv)
            }
        });
    (signed_frequency(best / w, h), signed_frequency(best % w, w))
}

struct BandEntry {
    // phase-plane regressors: -2π u / N and -2π v / M
    xu: f64,
    xv: f64,
    value: Complex64,
}

struct FitBand {
    entries: Vec<BandEntry>,
}

impl FitBand {
    fn new(cross: &[Complex64], w: usize, h: usize, params: &RegistrationParams) -> Self {
        let lim_u = params.band_fraction * h as f64 / 2.0;
        let lim_v = params.band_fraction * w as f64 / 2.0;
        let mut entries = Vec::new();
        for u in 0..h {
            let fu = signed_frequency(u, h);
            if fu.abs() >= lim_u {
                continue;
            }
            for v in 0..w {
                let fv = signed_frequency(v, w);
                if fv.abs() >= lim_v || (u == 0 && v == 0) {
                    continue;
                }
                entries.push(BandEntry {
                    xu: -2.0 * PI * fu / h as f64,
                    xv: -2.0 * PI * fv / w as f64,
                    value: cross[u * w + v],
                });
            }
        }
        if !entries.is_empty() {
            let mut mags: Vec<f64> = entries.iter().map(|e| e.value.norm()).collect();
            mags.sort_by(f64::total_cmp);
            let idx = ((mags.len() - 1) as f64 * params.magnitude_percentile).floor() as usize;
            let threshold = mags[idx];
            entries.retain(|e| e.value.norm() >= threshold && e.value.norm() > 0.0);
        }
        Self { entries }
    }

    /// Fits the residual phase after removing the integer shift. Returns
    /// `(dx, dy, rms_residual)`.
    fn fit(&self, int_dx: f64, int_dy: f64) -> Result<(f64, f64, f64)> {
        let phases: Vec<(f64, f64, f64)> = self
            .entries
            .iter()
            .map(|e| {
                let undo = Complex64::from_polar(1.0, -(e.xu * int_dx + e.xv * int_dy));
                (e.xu, e.xv, (e.value * undo).arg())
            })
            .collect();
        let (mut suu, mut suv, mut svv, mut su_p, mut sv_p) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(xu, xv, p) in &phases {
            suu += xu * xu;
            suv += xu * xv;
            svv += xv * xv;
            su_p += xu * p;
            sv_p += xv * p;
        }
        let det = suu * svv - suv * suv;
        if det.abs() <= 1e-12 * (suu * svv).max(f64::MIN_POSITIVE) {
            return Err(Error::DegenerateInput(
                "registration band does not constrain both shift components".into(),
            ));
        }
        let dx = (su_p * svv - sv_p * suv) / det;
        let dy = (sv_p * suu - su_p * suv) / det;
        let sse: f64 = phases
            .iter()
            .map(|&(xu, xv, p)| (p - dx * xu - dy * xv).powi(2))
            .sum();
        Ok((dx, dy, (sse / phases.len() as f64).sqrt()))
    }
}

/// How frame positions relative to the reference are obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum RegistrationMode {
    Estimate(RegistrationParams),
    /// Use known true shifts.
    Oracle(Vec<MotionVector>),
    /// Use deliberately supplied (possibly wrong) shifts.
    Injected(Vec<MotionVector>),
}

impl RegistrationMode {
    pub fn name(&self) -> &'static str {
        match self {
            RegistrationMode::Estimate(_) => "estimate",
            RegistrationMode::Oracle(_) => "oracle",
            RegistrationMode::Injected(_) => "injected",
        }
    }
}

/// Shifts of every frame relative to frame 0. Element 0 is always `(0, 0)`.
pub fn register_sequence(frames: &[GrayImage], mode: &RegistrationMode) -> Result<Vec<MotionVector>> {
    let reference = frames
        .first()
        .ok_or_else(|| Error::invalid("frames", "at least one frame is required"))?;
    match mode {
        RegistrationMode::Estimate(params) => {
            let mut shifts = vec![MotionVector::ZERO];
            let rest: Vec<MotionVector> = frames[1..]
                .par_iter()
                .map(|f| estimate_shift(reference, f, params))
                .collect::<Result<_>>()?;
            shifts.extend(rest);
            Ok(shifts)
        }
        RegistrationMode::Oracle(shifts) | RegistrationMode::Injected(shifts) => {
            if shifts.len() != frames.len() {
                return Err(Error::invalid(
                    "shifts",
                    format!("{} shifts supplied for {} frames", shifts.len(), frames.len()),
                ));
            }
            if !shifts[0].is_zero() {
                return Err(Error::invalid(
                    "shifts",
                    "shift of the reference frame must be (0, 0)",
                ));
            }
            Ok(shifts.clone())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrade::{convolve_psf, gaussian_psf, warp_shift, WarpMethod};

    fn scene(n: usize) -> GrayImage {
        GrayImage::from_fn(n, n, |i, j| {
            let (y, x) = (i as f64, j as f64);
            128.0
                + 40.0 * (0.21 * x + 0.05 * y).sin()
                + 30.0 * (0.13 * y - 0.3 * x).cos()
                + if (i / 9 + j / 7) % 2 == 0 { 25.0 } else { -25.0 }
        })
        .unwrap()
    }

    #[test]
    fn identical_frames_give_zero() {
        let img = scene(32);
        let d = estimate_shift(&img, &img, &RegistrationParams::default()).unwrap();
        assert!(d.dx.abs() < 1e-6 && d.dy.abs() < 1e-6);
    }

    #[test]
    fn recovers_integer_scale_shift() {
        let img = scene(64);
        let moved = warp_shift(&img, MotionVector::new(3.0, -2.0), WarpMethod::Fourier);
        let d = estimate_shift(&img, &moved, &RegistrationParams::default()).unwrap();
        assert!((d.dx - 3.0).abs() < 1e-3 && (d.dy + 2.0).abs() < 1e-3, "{d:?}");
    }

    #[test]
    fn recovers_subpixel_shift_of_blurred_frame() {
        let img = convolve_psf(&scene(64), &gaussian_psf(5, 1.0).unwrap());
        let moved = warp_shift(&img, MotionVector::new(-0.8, -0.8), WarpMethod::Fourier);
        let d = estimate_shift(&img, &moved, &RegistrationParams::default()).unwrap();
        assert!((d.dx + 0.8).abs() < 0.05 && (d.dy + 0.8).abs() < 0.05, "{d:?}");
    }

    #[test]
    fn antisymmetric() {
        let img = scene(48);
        let moved = warp_shift(&img, MotionVector::new(0.37, -0.61), WarpMethod::Fourier);
        let p = RegistrationParams::default();
        let ab = estimate_shift(&img, &moved, &p).unwrap();
        let ba = estimate_shift(&moved, &img, &p).unwrap();
        assert!((ab.dx + ba.dx).abs() < 0.02 && (ab.dy + ba.dy).abs() < 0.02);
    }

    #[test]
    fn shifts_compose() {
        let img = scene(64);
        let a = MotionVector::new(0.4, -0.3);
        let b = MotionVector::new(-1.1, 0.7);
        let twice = warp_shift(&warp_shift(&img, a, WarpMethod::Fourier), b, WarpMethod::Fourier);
        let d = estimate_shift(&img, &twice, &RegistrationParams::default()).unwrap();
        assert!((d.dx - (a.dx + b.dx)).abs() < 0.05 && (d.dy - (a.dy + b.dy)).abs() < 0.05);
    }

    #[test]
    fn input_errors() {
        let p = RegistrationParams::default();
        let img = scene(32);
        assert!(matches!(
            estimate_shift(&img, &scene(16), &p),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            estimate_shift(&scene(8), &scene(8), &p),
            Err(Error::Dimension(_))
        ));
        let flat = GrayImage::filled(32, 32, 5.0).unwrap();
        assert!(matches!(
            estimate_shift(&flat, &img, &p),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn unrelated_frames_are_low_confidence() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let a = GrayImage::new(32, 32, (0..1024).map(|_| rng.random_range(0.0..255.0)).collect()).unwrap();
        let b = GrayImage::new(32, 32, (0..1024).map(|_| rng.random_range(0.0..255.0)).collect()).unwrap();
        let p = RegistrationParams::default();
        assert!(matches!(
            estimate_shift(&a, &b, &p),
            Err(Error::LowConfidence { .. })
        ));
        let relaxed = RegistrationParams {
            allow_low_confidence: true,
            ..p
        };
        assert!(estimate_shift(&a, &b, &relaxed).is_ok());
    }

    #[test]
    fn sequence_modes() {
        let img = scene(32);
        let single = register_sequence(
            std::slice::from_ref(&img),
            &RegistrationMode::Estimate(Default::default()),
        )
        .unwrap();
        assert_eq!(single, vec![MotionVector::ZERO]);

        let frames = vec![img.clone(), img.clone()];
        let truth = vec![MotionVector::ZERO, MotionVector::new(0.0, -0.4)];
        assert_eq!(
            register_sequence(&frames, &RegistrationMode::Oracle(truth.clone())).unwrap(),
            truth
        );
        assert!(register_sequence(&frames, &RegistrationMode::Injected(vec![MotionVector::ZERO])).is_err());
        assert!(register_sequence(
            &frames,
            &RegistrationMode::Injected(vec![MotionVector::new(1.0, 0.0); 2])
        )
        .is_err());
        assert!(register_sequence(&[], &RegistrationMode::Oracle(vec![])).is_err());
    }
}
