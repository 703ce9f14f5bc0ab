//! Command-line driver for the `gradsr` pipeline: simulate low-resolution
//! frames, register them, reconstruct a high-resolution image, evaluate and
//! benchmark.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
mod error;
pub mod manifest;

pub use error::CliError;
pub use manifest::{ManifestError, ModeKind, RunManifest};

use commands::{bench_csv, frame_file_name, load_manifest, shifts_csv};

#[derive(Debug, Parser)]
#[command(
    name = "gradsr",
    version,
    about = "Multi-frame super-resolution by gradient-adaptive fusion"
)]
pub struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Degrade a high-resolution image into low-resolution frames.
    Simulate {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// High-resolution source image (PGM).
        hr: PathBuf,
    },
    /// Print the shift of every frame relative to the first as CSV.
    Register {
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Frame files; defaults to the frame_XX.pgm files next to the manifest.
        frames: Vec<PathBuf>,
    },
    /// Fuse and deblur frames into reconstructed.pgm, plus bilinear.pgm.
    Reconstruct {
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        out: PathBuf,
        frames: Vec<PathBuf>,
    },
    /// PSNR and MSSIM of each test image against a reference, as CSV.
    Evaluate {
        reference: PathBuf,
        #[arg(required = true)]
        tests: Vec<PathBuf>,
        /// Pixels excluded at each image edge.
        #[arg(long, default_value_t = 0)]
        border: usize,
    },
    /// Per-stage wall time over repeated runs, as CSV.
    Bench {
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
        hr: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Estimate,
    Oracle,
    Injected,
}

/// Manifest plus command-line overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Injected shifts as "dx,dy;dx,dy;...", reference first.
    #[arg(long)]
    pub shifts: Option<String>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub nsr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub allow_low_confidence: bool,
}

impl PipelineArgs {
    pub fn resolve(&self) -> Result<RunManifest, CliError> {
        let mut m = match &self.manifest {
            Some(p) => load_manifest(p)?,
            None => RunManifest::default(),
        };
        if let Some(mode) = self.mode {
            m.mode = match mode {
                ModeArg::Estimate => ModeKind::Estimate,
                ModeArg::Oracle => ModeKind::Oracle,
                ModeArg::Injected => ModeKind::Injected,
            };
        }
        if let Some(s) = &self.shifts {
            m.injected = manifest::parse_shift_list(s).map_err(CliError::Validation)?;
            if self.mode.is_none() {
                m.mode = ModeKind::Injected;
            }
        }
        if let Some(v) = self.mu {
            m.fusion.mu = v;
        }
        if let Some(v) = self.m {
            m.fusion.m = v;
        }
        if let Some(v) = self.nsr {
            m.nsr = Some(v);
        }
        if let Some(v) = self.seed {
            m.seed = v;
        }
        if self.allow_low_confidence {
            m.registration.allow_low_confidence = true;
        }
        m.validate()?;
        Ok(m)
    }

    /// Explicit frame paths, or the frames a `simulate` run left next to the
    /// manifest.
    fn frame_paths(&self, m: &RunManifest, given: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
        if !given.is_empty() {
            return Ok(given.to_vec());
        }
        let dir =
            self.manifest.as_deref().and_then(Path::parent).ok_or_else(|| {
                CliError::Validation("no frames given and no --manifest to locate them".into())
            })?;
        Ok((0..m.frames.len())
            .map(|k| dir.join(frame_file_name(k)))
            .collect())
    }
}

/// Executes `cli`, writing command output to `out`.
pub fn run(cli: &Cli, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    match cli.threads {
        Some(0) => Err(CliError::Validation("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?
            .install(|| dispatch(&cli.command, out)),
        None => dispatch(&cli.command, out),
    }
}

fn emit(out: &mut (dyn Write + Send), text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

fn dispatch(command: &Command, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    match command {
        Command::Simulate {
            manifest,
            out: dir,
            seed,
            hr,
        } => {
            let mut m = match manifest {
                Some(p) => load_manifest(p)?,
                None => RunManifest::default(),
            };
            if let Some(s) = seed {
                m.seed = *s;
            }
            let paths = commands::cmd_simulate(&m, hr, dir)?;
            for p in paths {
                emit(out, &format!("{}\n", p.display()))?;
            }
            Ok(())
        }
        Command::Register { pipeline, frames } => {
            let m = pipeline.resolve()?;
            let paths = pipeline.frame_paths(&m, frames)?;
            let shifts = commands::cmd_register(&m, &paths)?;
            emit(out, &shifts_csv(&shifts))
        }
        Command::Reconstruct {
            pipeline,
            out: dir,
            frames,
        } => {
            let m = pipeline.resolve()?;
            let paths = pipeline.frame_paths(&m, frames)?;
            let rec = commands::cmd_reconstruct(&m, &paths, dir)?;
            for t in &rec.timings {
                emit(out, &format!("{}: {:.3} ms\n", t.stage, t.ms))?;
            }
            Ok(())
        }
        Command::Evaluate {
            reference,
            tests,
            border,
        } => {
            let report = commands::cmd_evaluate(reference, tests, *border)?;
            emit(out, &report.to_csv())
        }
        Command::Bench {
            pipeline,
            repetitions,
            hr,
        } => {
            let m = pipeline.resolve()?;
            let rows = commands::cmd_bench(&m, hr, *repetitions)?;
            emit(out, &bench_csv(&rows))
        }
    }
}
