#![allow(dead_code)]

use gradsr_core::GrayImage;

/// Deterministic 8-bit test scene: smooth shading, hard-edged shapes,
/// oriented gratings and a fine checker patch.
pub fn test_scene(n: usize) -> GrayImage {
    let s = n as f64 / 256.0;
    GrayImage::from_fn(n, n, |i, j| {
        let (y, x) = (i as f64 / s, j as f64 / s);
        let mut v = 70.0 + 0.35 * x + 0.2 * y;
        // disc
        if (x - 80.0).powi(2) + (y - 90.0).powi(2) < 45.0f64.powi(2) {
            v = 200.0 - 0.3 * (y - 90.0);
        }
        // rectangle
        if (150.0..230.0).contains(&x) && (30.0..95.0).contains(&y) {
            v = 30.0;
        }
        // diagonal band
        if ((x + y) - 300.0).abs() < 12.0 {
            v = 235.0;
        }
        // grating patch
        if (140.0..240.0).contains(&x) && (140.0..240.0).contains(&y) {
            v = 128.0 + 70.0 * (0.35 * x + 0.22 * y).sin();
        }
        // ring
        let r = ((x - 70.0).powi(2) + (y - 200.0).powi(2)).sqrt();
        if (20.0..30.0).contains(&r) {
            v = 20.0;
        }
        // small checker
        if (20.0..50.0).contains(&x) && (20.0..50.0).contains(&y) && ((i / 4 + j / 4) % 2 == 0) {
            v = 250.0;
        }
        v.round().clamp(0.0, 255.0)
    })
    .unwrap()
}
