use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gradsr_core::baseline::bilinear_upscale;
use gradsr_core::deblur::wiener_filter;
use gradsr_core::degrade::{simulate_sequence, MotionVector};
use gradsr_core::fuse::{build_grid, interpolate_hr};
use gradsr_core::image::{read_pgm_file, write_pgm_file};
use gradsr_core::metrics::{mssim, psnr, QualityReport};
use gradsr_core::register::register_sequence;
use gradsr_core::GrayImage;

use crate::error::{CliError, Context};
use crate::manifest::RunManifest;

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const RECONSTRUCTED_FILE: &str = "reconstructed.pgm";
pub const BILINEAR_FILE: &str = "bilinear.pgm";

pub fn frame_file_name(k: usize) -> String {
    format!("frame_{k:02}.pgm")
}

pub fn load_image(path: &Path) -> Result<GrayImage, CliError> {
    read_pgm_file(path)
        .map_err(|e| CliError::io(path, e))?
        .context(|| path.display().to_string())
}

pub fn load_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    RunManifest::parse(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn save_image(path: &Path, img: &GrayImage) -> Result<(), CliError> {
    write_pgm_file(path, img).map_err(|e| CliError::io(path, e))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageTime {
    pub stage: &'static str,
    pub ms: f64,
}

struct Stopwatch {
    times: Vec<StageTime>,
}

impl Stopwatch {
    fn new() -> Self {
        Self { times: Vec::new() }
    }

    fn run<T>(&mut self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.times.push(StageTime {
            stage,
            ms: start.elapsed().as_secs_f64() * 1e3,
        });
        out
    }
}

/// Simulates the manifest's frames from `hr_path` and writes
/// `frame_XX.pgm` plus `manifest.txt` into `out_dir`.
pub fn cmd_simulate(
    manifest: &RunManifest,
    hr_path: &Path,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    manifest.validate()?;
    let hr = load_image(hr_path)?;
    let cfg = manifest.degradation_config()?;
    let frames = simulate_sequence(&hr, &cfg).context(|| format!("simulating from {}", hr_path.display()))?;

    create_dir(out_dir)?;
    let mut paths = Vec::with_capacity(frames.len());
    for (k, frame) in frames.iter().enumerate() {
        let path = out_dir.join(frame_file_name(k));
        save_image(&path, &frame.image)?;
        paths.push(path);
    }
    let mut written = manifest.clone();
    written.input = Some(hr_path.display().to_string());
    let mpath = out_dir.join(MANIFEST_FILE);
    fs::write(&mpath, written.to_text()).map_err(|e| CliError::io(&mpath, e))?;
    Ok(paths)
}

fn load_frames(paths: &[PathBuf]) -> Result<Vec<GrayImage>, CliError> {
    if paths.is_empty() {
        return Err(CliError::Validation("at least one frame is required".into()));
    }
    let frames = paths
        .iter()
        .map(|p| load_image(p))
        .collect::<Result<Vec<_>, _>>()?;
    let dims = frames[0].dimensions();
    if let Some(k) = frames.iter().position(|f| f.dimensions() != dims) {
        return Err(CliError::Validation(format!(
            "{}: {}x{} does not match {}x{} of {}",
            paths[k].display(),
            frames[k].width(),
            frames[k].height(),
            dims.0,
            dims.1,
            paths[0].display()
        )));
    }
    Ok(frames)
}

/// Shifts of every frame relative to the first, per the manifest's mode.
pub fn cmd_register(manifest: &RunManifest, frame_paths: &[PathBuf]) -> Result<Vec<MotionVector>, CliError> {
    manifest.validate()?;
    let frames = load_frames(frame_paths)?;
    register_sequence(&frames, &manifest.registration_mode()).context(|| "registration".into())
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub image: GrayImage,
    pub baseline: GrayImage,
    pub shifts: Vec<MotionVector>,
    pub nsr: f64,
    pub timings: Vec<StageTime>,
}

/// In-memory pipeline: register, build the sample grid, fuse, deblur, plus
/// the bilinear baseline from the reference frame.
pub fn reconstruct_frames(manifest: &RunManifest, frames: &[GrayImage]) -> Result<Reconstruction, CliError> {
    manifest.validate()?;
    let mut clock = Stopwatch::new();
    let ratio = manifest.ratio;
    let shifts = clock
        .run("register", || {
            register_sequence(frames, &manifest.registration_mode())
        })
        .context(|| "registration".into())?;
    let grid = clock
        .run("grid", || {
            build_grid(frames, &shifts, ratio, manifest.fusion.gradient_mode)
        })
        .context(|| "building sample grid".into())?;
    let fused = clock
        .run("fuse", || interpolate_hr(&grid, ratio, &manifest.fusion))
        .context(|| "fusion".into())?;
    let wiener = manifest.wiener_params()?;
    let image = clock
        .run("deblur", || wiener_filter(&fused, &wiener))
        .context(|| "deblurring".into())?;
    let baseline = clock
        .run("baseline", || bilinear_upscale(&frames[0], ratio))
        .context(|| "bilinear baseline".into())?;
    Ok(Reconstruction {
        image,
        baseline,
        shifts,
        nsr: wiener.nsr,
        timings: clock.times,
    })
}

/// Runs the pipeline on frame files and writes `reconstructed.pgm` and
/// `bilinear.pgm` into `out_dir`.
pub fn cmd_reconstruct(
    manifest: &RunManifest,
    frame_paths: &[PathBuf],
    out_dir: &Path,
) -> Result<Reconstruction, CliError> {
    let start = Instant::now();
    let frames = load_frames(frame_paths)?;
    let load_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut rec = reconstruct_frames(manifest, &frames)?;
    rec.timings.insert(
        0,
        StageTime {
            stage: "load",
            ms: load_ms,
        },
    );

    let start = Instant::now();
    create_dir(out_dir)?;
    save_image(&out_dir.join(RECONSTRUCTED_FILE), &rec.image)?;
    save_image(&out_dir.join(BILINEAR_FILE), &rec.baseline)?;
    rec.timings.push(StageTime {
        stage: "write",
        ms: start.elapsed().as_secs_f64() * 1e3,
    });
    Ok(rec)
}

/// One row per test image. Metrics ignore a `border`-pixel frame.
pub fn cmd_evaluate(
    reference_path: &Path,
    test_paths: &[PathBuf],
    border: usize,
) -> Result<QualityReport, CliError> {
    let reference = load_image(reference_path)?;
    let ref_name = display_name(reference_path);
    let ref_inner = reference
        .crop_border(border)
        .context(|| format!("border {border}"))?;
    let mut report = QualityReport::default();
    for path in test_paths {
        let test = load_image(path)?;
        if test.dimensions() != reference.dimensions() {
            return Err(CliError::Validation(format!(
                "{}: {}x{} does not match reference {}x{}",
                path.display(),
                test.width(),
                test.height(),
                reference.width(),
                reference.height()
            )));
        }
        let p = psnr(&reference, &test, border).context(|| path.display().to_string())?;
        let inner = test.crop_border(border).context(|| path.display().to_string())?;
        let s = mssim(&ref_inner, &inner).context(|| path.display().to_string())?;
        report.push(ref_name.clone(), display_name(path), p, s);
    }
    Ok(report)
}

fn display_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub stage: &'static str,
    pub min_ms: f64,
    pub median_ms: f64,
}

/// Times every pipeline stage `repetitions` times on `hr`.
pub fn bench_image(
    manifest: &RunManifest,
    hr: &GrayImage,
    repetitions: usize,
) -> Result<Vec<BenchRow>, CliError> {
    if repetitions == 0 {
        return Err(CliError::Validation("repetitions must be at least 1".into()));
    }
    manifest.validate()?;
    let cfg = manifest.degradation_config()?;
    let mut runs: Vec<Vec<StageTime>> = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        let frames = simulate_sequence(hr, &cfg).context(|| "simulation".into())?;
        let sim_ms = start.elapsed().as_secs_f64() * 1e3;
        let images: Vec<GrayImage> = frames.into_iter().map(|f| f.image).collect();
        let mut rec = reconstruct_frames(manifest, &images)?;
        rec.timings.insert(
            0,
            StageTime {
                stage: "simulate",
                ms: sim_ms,
            },
        );
        runs.push(rec.timings);
    }
    let stages: Vec<&'static str> = runs[0].iter().map(|t| t.stage).collect();
    Ok(stages
        .iter()
        .enumerate()
        .map(|(i, &stage)| {
            let mut ms: Vec<f64> = runs.iter().map(|r| r[i].ms).collect();
            ms.sort_by(f64::total_cmp);
            let n = ms.len();
            let median = if n % 2 == 1 {
                ms[n / 2]
            } else {
                0.5 * (ms[n / 2 - 1] + ms[n / 2])
            };
            BenchRow {
                stage,
                min_ms: ms[0],
                median_ms: median,
            }
        })
        .collect())
}

pub fn cmd_bench(
    manifest: &RunManifest,
    hr_path: &Path,
    repetitions: usize,
) -> Result<Vec<BenchRow>, CliError> {
    let hr = load_image(hr_path)?;
    bench_image(manifest, &hr, repetitions)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("stage,min_ms,median_ms\n");
    for r in rows {
        out.push_str(&format!("{},{:.3},{:.3}\n", r.stage, r.min_ms, r.median_ms));
    }
    out
}

pub fn shifts_csv(shifts: &[MotionVector]) -> String {
    let mut out = String::from("frame,dx,dy\n");
    for (k, s) in shifts.iter().enumerate() {
        out.push_str(&format!("{k},{:.4},{:.4}\n", s.dx, s.dy));
    }
    out
}
