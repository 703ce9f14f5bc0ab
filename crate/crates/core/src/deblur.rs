//! Constant-NSR Wiener deconvolution under a circular boundary model.

use rustfft::num_complex::Complex64;

use crate::degrade::Psf;
use crate::spectral::{dft2, idft2_real_part, Spectrum};
use crate::{Error, GrayImage, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WienerParams {
    pub psf: Psf,
    /// Noise-to-signal power ratio `K` added to `|H|²`.
    pub nsr: f64,
}

impl WienerParams {
    /// NSR matching a mean BSNR in dB: `10^(-bsnr / 10)`.
    pub fn nsr_from_bsnr(bsnr_db: f64) -> f64 {
        10f64.powf(-bsnr_db / 10.0)
    }
}

/// Transfer function of `psf` on a `width x height` periodic grid: the
/// kernel is zero-padded with its centre tap moved to `(0, 0)`.
pub fn psf_transfer(psf: &Psf, width: usize, height: usize) -> Result<Spectrum> {
    if psf.size() > width || psf.size() > height {
        return Err(Error::Dimension(format!(
            "{}x{} PSF does not fit a {width}x{height} image",
            psf.size(),
            psf.size()
        )));
    }
    let r = psf.radius() as isize;
    let mut padded = vec![0.0; width * height];
    for a in 0..psf.size() {
        for b in 0..psf.size() {
            let row = (a as isize - r).rem_euclid(height as isize) as usize;
            let col = (b as isize - r).rem_euclid(width as isize) as usize;
            padded[row * width + col] += psf.tap(a, b);
        }
    }
    Ok(dft2(&GrayImage::new(width, height, padded)?))
}

/// Applies `conj(H) / (|H|² + nsr)` in the frequency domain. Frequencies where
/// the denominator is exactly zero are zeroed. The result is not clamped.
pub fn wiener_filter(img: &GrayImage, params: &WienerParams) -> Result<GrayImage> {
    if params.nsr.is_nan() || params.nsr < 0.0 {
        return Err(Error::invalid(
            "nsr",
            format!("{} must be non-negative", params.nsr),
        ));
    }
    let (w, h) = img.dimensions();
    let transfer = psf_transfer(&params.psf, w, h)?;
    let mut spec = dft2(img);
    for (c, hf) in spec.coeffs_mut().iter_mut().zip(transfer.coeffs()) {
        let denom = hf.norm_sqr() + params.nsr;
        *c = if denom > 0.0 {
            *c * hf.conj() / denom
        } else {
            Complex64::default()
        };
    }
    idft2_real_part(&spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrade::gaussian_psf;
    use proptest::prelude::*;

    fn textured(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |i, j| ((i * 37 + j * 91 + i * j * 7) % 256) as f64).unwrap()
    }

    #[test]
    fn identity_psf_without_regularization_is_identity() {
        let img = textured(16, 12);
        let out = wiener_filter(
            &img,
            &WienerParams {
                psf: Psf::identity(),
                nsr: 0.0,
            },
        )
        .unwrap();
        for (a, b) in img.pixels().iter().zip(out.pixels()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn huge_nsr_suppresses_everything() {
        let img = textured(16, 16);
        let out = wiener_filter(
            &img,
            &WienerParams {
                psf: gaussian_psf(5, 1.0).unwrap(),
                nsr: 1e12,
            },
        )
        .unwrap();
        assert!(out.pixels().iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn oversized_psf_rejected() {
        let img = textured(4, 4);
        let p = WienerParams {
            psf: gaussian_psf(5, 1.0).unwrap(),
            nsr: 0.1,
        };
        assert!(matches!(wiener_filter(&img, &p), Err(Error::Dimension(_))));
        let bad = WienerParams {
            psf: Psf::identity(),
            nsr: -1.0,
        };
        assert!(wiener_filter(&img, &bad).is_err());
    }

    #[test]
    fn dc_gain() {
        let img = textured(20, 20);
        let nsr = 0.25;
        let out = wiener_filter(
            &img,
            &WienerParams {
                psf: gaussian_psf(5, 1.0).unwrap(),
                nsr,
            },
        )
        .unwrap();
        assert!((out.mean() - img.mean() / (1.0 + nsr)).abs() < 1e-9);
    }

    #[test]
    fn nsr_from_bsnr() {
        assert!((WienerParams::nsr_from_bsnr(30.0) - 1e-3).abs() < 1e-18);
    }

    fn high_band_energy(img: &GrayImage) -> f64 {
        use crate::spectral::signed_frequency;
        let s = dft2(img);
        let (w, h) = img.dimensions();
        let mut e = 0.0;
        for u in 0..h {
            for v in 0..w {
                let central = signed_frequency(u, h).abs() < h as f64 / 4.0
                    && signed_frequency(v, w).abs() < w as f64 / 4.0;
                if !central {
                    e += s.get(u, v).norm_sqr();
                }
            }
        }
        e
    }

    proptest! {
        #[test]
        fn linear(
            a in -2.0f64..2.0, b in -2.0f64..2.0,
            x in proptest::collection::vec(0.0f64..255.0, 144),
            y in proptest::collection::vec(0.0f64..255.0, 144),
        ) {
            let p = WienerParams { psf: gaussian_psf(3, 0.9).unwrap(), nsr: 0.01 };
            let xi = GrayImage::new(12, 12, x).unwrap();
            let yi = GrayImage::new(12, 12, y).unwrap();
            let mix = GrayImage::new(12, 12, xi.pixels().iter().zip(yi.pixels()).map(|(p, q)| a * p + b * q).collect()).unwrap();
            let (wx, wy, wm) = (wiener_filter(&xi, &p).unwrap(), wiener_filter(&yi, &p).unwrap(), wiener_filter(&mix, &p).unwrap());
            for k in 0..144 {
                prop_assert!((wm.pixels()[k] - (a * wx.pixels()[k] + b * wy.pixels()[k])).abs() < 1e-9);
            }
        }

        #[test]
        fn more_regularization_never_adds_high_frequency_energy(
            px in proptest::collection::vec(0.0f64..255.0, 256),
            nsr in 0.0f64..0.5, extra in 0.0f64..1.0,
        ) {
            let img = GrayImage::new(16, 16, px).unwrap();
            let psf = gaussian_psf(5, 1.0).unwrap();
            let lo = wiener_filter(&img, &WienerParams { psf: psf.clone(), nsr }).unwrap();
            let hi = wiener_filter(&img, &WienerParams { psf, nsr: nsr + extra }).unwrap();
            prop_assert!(high_band_energy(&hi) <= high_band_energy(&lo) * (1.0 + 1e-9) + 1e-9);
        }
    }
}
