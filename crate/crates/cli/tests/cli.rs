use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gradsr_cli::commands::bench_image;
use gradsr_cli::RunManifest;
use gradsr_core::baseline::bilinear_upscale;
use gradsr_core::image::{read_pgm_file, write_pgm_file};
use gradsr_core::GrayImage;
use rand::{Rng, SeedableRng};

fn camera_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/camera.pgm")
}

fn run(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gradsr"))
        .args(args.iter().map(|a| a.as_ref()))
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate(out: &Path) -> Output {
    run(&[&"simulate", &"--out", &out, &camera_path()])
}

#[test]
fn simulate_writes_frames_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let o = simulate(&a);
    assert!(o.status.success(), "{}", stderr(&o));
    for k in 0..4 {
        let img = read_pgm_file(a.join(format!("frame_{k:02}.pgm")))
            .unwrap()
            .unwrap();
        assert_eq!(img.dimensions(), (128, 128));
    }
    let m = RunManifest::parse(&fs::read_to_string(a.join("manifest.txt")).unwrap()).unwrap();
    assert_eq!(m.frames, RunManifest::preset(0).frames);
    assert!(m.input.is_some());

    let b = dir.path().join("b");
    assert!(simulate(&b).status.success());
    for k in 0..4 {
        let name = format!("frame_{k:02}.pgm");
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap());
    }
}

#[test]
fn simulate_rejects_non_dividing_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.txt");
    fs::write(&manifest, "ratio = 3\n").unwrap();
    let o = run(&[
        &"simulate",
        &"--manifest",
        &manifest,
        &"--out",
        &dir.path(),
        &camera_path(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ratio"), "{}", stderr(&o));
}

#[test]
fn reconstruct_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    assert!(simulate(&frames).status.success());
    let out = dir.path().join("out");
    let o = run(&[
        &"reconstruct",
        &"--manifest",
        &frames.join("manifest.txt"),
        &"--out",
        &out,
        &"--nsr",
        &"0.02",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for stage in ["load", "register", "grid", "fuse", "deblur", "baseline", "write"] {
        assert!(
            text.lines()
                .any(|l| l.starts_with(&format!("{stage}: ")) && l.ends_with(" ms")),
            "{text}"
        );
    }
    let rec = out.join("reconstructed.pgm");
    let bil = out.join("bilinear.pgm");
    assert_eq!(read_pgm_file(&rec).unwrap().unwrap().dimensions(), (256, 256));

    let o = run(&[&"evaluate", &"--border", &"8", &camera_path(), &rec, &bil]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "image,method,psnr_db,mssim");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("camera,reconstructed,"));
    assert!(lines[2].starts_with("camera,bilinear,"));
    let psnr = |l: &str| l.split(',').nth(2).unwrap().parse::<f64>().unwrap();
    assert!(psnr(lines[1]) > psnr(lines[2]), "{csv}");
}

#[test]
fn evaluate_self_and_errors() {
    let cam = camera_path();
    let o = run(&[&"evaluate", &cam, &cam]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "image,method,psnr_db,mssim\ncamera,camera,inf,1.0000\n"
    );

    let missing = Path::new("/nonexistent/nowhere.pgm");
    let o = run(&[&"evaluate", &cam, &missing]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("nowhere.pgm"));

    let dir = tempfile::tempdir().unwrap();
    let small = dir.path().join("small.pgm");
    write_pgm_file(&small, &GrayImage::filled(8, 8, 1.0).unwrap()).unwrap();
    let o = run(&[&"evaluate", &cam, &small]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("small.pgm"));

    let garbage = dir.path().join("garbage.pgm");
    fs::write(&garbage, b"P6\n1 1\n255\n\0\0\0").unwrap();
    assert_eq!(run(&[&"evaluate", &cam, &garbage]).status.code(), Some(2));
}

#[test]
fn register_estimates_preset_shifts() {
    let dir = tempfile::tempdir().unwrap();
    assert!(simulate(dir.path()).status.success());
    let o = run(&[
        &"register",
        &"--manifest",
        &dir.path().join("manifest.txt"),
        &"--mode",
        &"estimate",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    let rows: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
            (f[0], f[1])
        })
        .collect();
    let truth = [(0.0, 0.0), (0.0, -0.8), (-0.8, -0.8), (-0.8, 0.0)];
    assert_eq!(rows.len(), 4);
    for (r, t) in rows.iter().zip(truth) {
        assert!((r.0 - t.0).abs() < 0.1 && (r.1 - t.1).abs() < 0.1, "{csv}");
    }
}

#[test]
fn low_confidence_is_fatal_unless_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let paths: Vec<PathBuf> = (0..2)
        .map(|k| {
            let img = GrayImage::from_fn(64, 64, |_, _| rng.random_range(0.0..255.0f64).round()).unwrap();
            let p = dir.path().join(format!("noise{k}.pgm"));
            write_pgm_file(&p, &img).unwrap();
            p
        })
        .collect();
    let o = run(&[&"register", &"--mode", &"estimate", &paths[0], &paths[1]]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("low confidence"));
    let o = run(&[
        &"register",
        &"--mode",
        &"estimate",
        &"--allow-low-confidence",
        &paths[0],
        &paths[1],
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn injected_shifts_and_validation_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert!(simulate(dir.path()).status.success());
    let manifest = dir.path().join("manifest.txt");
    let o = run(&[
        &"register",
        &"--manifest",
        &manifest,
        &"--shifts",
        &"0,0;0,-0.1;-0.1,-0.1;-0.1,0",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "frame,dx,dy\n0,0.0000,0.0000\n1,0.0000,-0.1000\n2,-0.1000,-0.1000\n3,-0.1000,0.0000\n"
    );

    let o = run(&[&"register", &"--manifest", &manifest, &"--shifts", &"0,0;0,-0.1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[&"register", &"--manifest", &manifest, &"--mu", &"1.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[&"--threads", &"0", &"register", &"--manifest", &manifest]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[&"register", &"--manifest", &dir.path().join("absent.txt")]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bench_single_repetition() {
    let o = run(&[&"bench", &"--repetitions", &"1", &camera_path()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "stage,min_ms,median_ms");
    let stages: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(
        stages,
        ["simulate", "register", "grid", "fuse", "deblur", "baseline"]
    );
}

#[test]
fn fusion_time_scales_linearly_with_pixels() {
    let small = read_pgm_file(camera_path()).unwrap().unwrap();
    let large = bilinear_upscale(&small, 2).unwrap();
    let m = RunManifest::preset(0);
    let fuse_ms = |img: &GrayImage| {
        bench_image(&m, img, 3)
            .unwrap()
            .into_iter()
            .find(|r| r.stage == "fuse")
            .unwrap()
            .median_ms
    };
    let ratio = fuse_ms(&large) / fuse_ms(&small);
    assert!(
        (4.0 / 3.0..=12.0).contains(&ratio),
        "512/256 fusion time ratio {ratio}"
    );
}
