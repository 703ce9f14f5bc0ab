//! Run manifest: a flat `key = value` text file describing one experiment.
//!
//! ```text
//! ratio = 2
//! seed = 0
//! warp = fourier
//! psf.size = 5
//! psf.sigma = 1.0
//! frames.0.dx = 0.0
//! frames.0.dy = 0.0
//! frames.0.bsnr_db = 30.0
//! fusion.mu = 0.9
//! wiener.nsr = auto
//! registration.mode = oracle
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Keys that are absent
//! take the value of the standard four-frame preset, except that listing any
//! `frames.*` key replaces the preset frames entirely. Floats are written in
//! shortest round-trip form, so `parse(to_text(m)) == m`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use gradsr_core::deblur::WienerParams;
use gradsr_core::degrade::{gaussian_psf, DegradationConfig, FrameSpec, MotionVector, WarpMethod};
use gradsr_core::fuse::{FusionParams, GradientMode};
use gradsr_core::register::{RegistrationMode, RegistrationParams};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("manifest{}: {key}: {message}", line.map(|l| format!(" line {l}")).unwrap_or_default())]
pub struct ManifestError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl ManifestError {
    fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            line: None,
            key: key.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModeKind {
    Estimate,
    #[default]
    Oracle,
    Injected,
}

impl ModeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeKind::Estimate => "estimate",
            ModeKind::Oracle => "oracle",
            ModeKind::Injected => "injected",
        }
    }
}

impl FromStr for ModeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "estimate" => Ok(ModeKind::Estimate),
            "oracle" => Ok(ModeKind::Oracle),
            "injected" => Ok(ModeKind::Injected),
            other => Err(format!("unknown mode {other:?} (estimate|oracle|injected)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub ratio: usize,
    pub psf_size: usize,
    pub psf_sigma: f64,
    pub warp_method: WarpMethod,
    pub seed: u64,
    pub frames: Vec<FrameSpec>,
    pub fusion: FusionParams,
    /// `None` derives the Wiener NSR from the mean frame BSNR.
    pub nsr: Option<f64>,
    pub mode: ModeKind,
    pub registration: RegistrationParams,
    /// Shifts used in injected mode, reference first.
    pub injected: Vec<MotionVector>,
    pub input: Option<String>,
}

impl Default for RunManifest {
    fn default() -> Self {
        Self::preset(0)
    }
}

impl RunManifest {
    /// Standard 2:1 four-frame protocol with oracle registration.
    pub fn preset(seed: u64) -> Self {
        let cfg = DegradationConfig::standard_preset(seed);
        Self {
            ratio: cfg.ratio,
            psf_size: 5,
            psf_sigma: 1.0,
            warp_method: cfg.warp_method,
            seed,
            frames: cfg.frames,
            fusion: FusionParams::default(),
            nsr: None,
            mode: ModeKind::Oracle,
            registration: RegistrationParams::default(),
            injected: Vec::new(),
            input: None,
        }
    }

    pub fn degradation_config(&self) -> Result<DegradationConfig, ManifestError> {
        let psf = gaussian_psf(self.psf_size, self.psf_sigma)
            .map_err(|e| ManifestError::new("psf", e.to_string()))?;
        Ok(DegradationConfig {
            ratio: self.ratio,
            psf,
            frames: self.frames.clone(),
            seed: self.seed,
            warp_method: self.warp_method,
        })
    }

    /// The explicit NSR, or `10^(-b/10)` for the mean BSNR `b` of the noisy
    /// frames (zero when every frame is noiseless).
    pub fn effective_nsr(&self) -> f64 {
        self.nsr.unwrap_or_else(|| {
            let cfg = DegradationConfig {
                ratio: self.ratio,
                psf: gradsr_core::degrade::Psf::identity(),
                frames: self.frames.clone(),
                seed: self.seed,
                warp_method: self.warp_method,
            };
            cfg.mean_bsnr_db().map_or(0.0, WienerParams::nsr_from_bsnr)
        })
    }

    pub fn wiener_params(&self) -> Result<WienerParams, ManifestError> {
        let psf = gaussian_psf(self.psf_size, self.psf_sigma)
            .map_err(|e| ManifestError::new("psf", e.to_string()))?;
        Ok(WienerParams {
            psf,
            nsr: self.effective_nsr(),
        })
    }

    pub fn registration_mode(&self) -> RegistrationMode {
        match self.mode {
            ModeKind::Estimate => RegistrationMode::Estimate(self.registration),
            ModeKind::Oracle => RegistrationMode::Oracle(self.frames.iter().map(|f| f.shift).collect()),
            ModeKind::Injected => RegistrationMode::Injected(self.injected.clone()),
        }
    }

    /// Checks everything that can be checked without the input images.
    pub fn validate(&self) -> Result<(), ManifestError> {
        if self.ratio < 2 {
            return Err(ManifestError::new(
                "ratio",
                format!("{} must be at least 2", self.ratio),
            ));
        }
        gaussian_psf(self.psf_size, self.psf_sigma).map_err(|e| ManifestError::new("psf", e.to_string()))?;
        let first = self
            .frames
            .first()
            .ok_or_else(|| ManifestError::new("frames", "at least one frame is required"))?;
        if !first.shift.is_zero() {
            return Err(ManifestError::new("frames.0", "reference shift must be (0, 0)"));
        }
        for (k, f) in self.frames.iter().enumerate() {
            if !f.shift.dx.is_finite() || !f.shift.dy.is_finite() {
                return Err(ManifestError::new(format!("frames.{k}"), "shift must be finite"));
            }
            if f.bsnr_db.is_some_and(|b| b.is_nan() || b == f64::NEG_INFINITY) {
                return Err(ManifestError::new(format!("frames.{k}.bsnr_db"), "invalid BSNR"));
            }
        }
        self.fusion
            .validate()
            .map_err(|e| ManifestError::new("fusion", e.to_string()))?;
        self.registration
            .validate()
            .map_err(|e| ManifestError::new("registration", e.to_string()))?;
        if let Some(nsr) = self.nsr {
            if !nsr.is_finite() || nsr < 0.0 {
                return Err(ManifestError::new(
                    "wiener.nsr",
                    format!("{nsr} must be finite and >= 0"),
                ));
            }
        }
        if self.mode == ModeKind::Injected {
            match self.injected.first() {
                None => {
                    return Err(ManifestError::new(
                        "injected",
                        "injected mode needs injected.k.dx/dy shifts",
                    ));
                }
                Some(s) if !s.is_zero() => {
                    return Err(ManifestError::new("injected.0", "reference shift must be (0, 0)"));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: &dyn fmt::Display| out.push_str(&format!("{k} = {v}\n"));
        put("ratio", &self.ratio);
        put("seed", &self.seed);
        put("warp", &self.warp_method.as_str());
        put("psf.size", &self.psf_size);
        put("psf.sigma", &F(self.psf_sigma));
        for (k, f) in self.frames.iter().enumerate() {
            put(&format!("frames.{k}.dx"), &F(f.shift.dx));
            put(&format!("frames.{k}.dy"), &F(f.shift.dy));
            match f.bsnr_db {
                Some(b) => put(&format!("frames.{k}.bsnr_db"), &F(b)),
                None => put(&format!("frames.{k}.bsnr_db"), &"none"),
            }
        }
        put("fusion.mu", &F(self.fusion.mu));
        put("fusion.m", &F(self.fusion.m));
        put("fusion.window", &self.fusion.neighbor_window);
        put("fusion.k", &self.fusion.k_neighbors);
        put("fusion.gradient_mode", &self.fusion.gradient_mode.as_str());
        match self.nsr {
            Some(v) => put("wiener.nsr", &F(v)),
            None => put("wiener.nsr", &"auto"),
        }
        put("registration.mode", &self.mode.as_str());
        put("registration.band_fraction", &F(self.registration.band_fraction));
        put(
            "registration.magnitude_percentile",
            &F(self.registration.magnitude_percentile),
        );
        put(
            "registration.max_residual_rad",
            &F(self.registration.max_residual_rad),
        );
        put(
            "registration.allow_low_confidence",
            &self.registration.allow_low_confidence,
        );
        for (k, s) in self.injected.iter().enumerate() {
            put(&format!("injected.{k}.dx"), &F(s.dx));
            put(&format!("injected.{k}.dy"), &F(s.dy));
        }
        if let Some(p) = &self.input {
            put("input", p);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ManifestError {
                line: Some(n + 1),
                key: line.to_string(),
                message: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ManifestError {
                    line: Some(n + 1),
                    key: String::new(),
                    message: "empty key".into(),
                });
            }
            if entries
                .insert(key.to_string(), (n + 1, value.trim().to_string()))
                .is_some()
            {
                return Err(ManifestError {
                    line: Some(n + 1),
                    key: key.to_string(),
                    message: "duplicate key".into(),
                });
            }
        }
        Entries(entries).into_manifest()
    }
}

/// Shortest representation that parses back to the same `f64`.
struct F(f64);

impl fmt::Display for F {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

struct Entries(BTreeMap<String, (usize, String)>);

impl Entries {
    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ManifestError>
    where
        T::Err: fmt::Display,
    {
        match self.0.remove(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|e: T::Err| ManifestError {
                line: Some(line),
                key: key.to_string(),
                message: format!("{v:?}: {e}"),
            }),
        }
    }

    fn required<T: FromStr>(&mut self, key: &str) -> Result<T, ManifestError>
    where
        T::Err: fmt::Display,
    {
        self.take(key)?.ok_or_else(|| ManifestError::new(key, "missing"))
    }

    /// Number of consecutive indices `0..n` used under `prefix.`.
    fn indexed_count(&self, prefix: &str) -> Result<usize, ManifestError> {
        let mut seen = Vec::new();
        for (key, (line, _)) in &self.0 {
            let Some(rest) = key.strip_prefix(prefix).and_then(|r| r.strip_prefix('.')) else {
                continue;
            };
            let idx = rest.split('.').next().unwrap_or("");
            let k: usize = idx.parse().map_err(|_| ManifestError {
                line: Some(*line),
                key: key.clone(),
                message: "expected a numeric index".into(),
            })?;
            seen.push(k);
        }
        seen.sort_unstable();
        seen.dedup();
        if let Some((pos, _)) = seen.iter().enumerate().find(|(i, k)| *i != **k) {
            return Err(ManifestError::new(prefix, format!("index {pos} is missing")));
        }
        Ok(seen.len())
    }

    fn shift(&mut self, prefix: &str, k: usize) -> Result<MotionVector, ManifestError> {
        Ok(MotionVector::new(
            self.required(&format!("{prefix}.{k}.dx"))?,
            self.required(&format!("{prefix}.{k}.dy"))?,
        ))
    }

    fn into_manifest(mut self) -> Result<RunManifest, ManifestError> {
        let mut m = RunManifest::preset(0);
        if let Some(v) = self.take("ratio")? {
            m.ratio = v;
        }
        if let Some(v) = self.take("seed")? {
            m.seed = v;
        }
        if let Some(v) = self.take::<WarpMethod>("warp")? {
            m.warp_method = v;
        }
        if let Some(v) = self.take("psf.size")? {
            m.psf_size = v;
        }
        if let Some(v) = self.take("psf.sigma")? {
            m.psf_sigma = v;
        }

        let n = self.indexed_count("frames")?;
        if n > 0 {
            m.frames = (0..n)
                .map(|k| {
                    let shift = self.shift("frames", k)?;
                    let bsnr_db = self
                        .take::<Bsnr>(&format!("frames.{k}.bsnr_db"))?
                        .and_then(|b| b.0);
                    Ok(FrameSpec { shift, bsnr_db })
                })
                .collect::<Result<_, ManifestError>>()?;
        }

        if let Some(v) = self.take("fusion.mu")? {
            m.fusion.mu = v;
        }
        if let Some(v) = self.take("fusion.m")? {
            m.fusion.m = v;
        }
        if let Some(v) = self.take("fusion.window")? {
            m.fusion.neighbor_window = v;
        }
        if let Some(v) = self.take("fusion.k")? {
            m.fusion.k_neighbors = v;
        }
        if let Some(v) = self.take::<GradientMode>("fusion.gradient_mode")? {
            m.fusion.gradient_mode = v;
        }
        if let Some(v) = self.take::<Nsr>("wiener.nsr")? {
            m.nsr = v.0;
        }

        if let Some(v) = self.take("registration.mode")? {
            m.mode = v;
        }
        if let Some(v) = self.take("registration.band_fraction")? {
            m.registration.band_fraction = v;
        }
        if let Some(v) = self.take("registration.magnitude_percentile")? {
            m.registration.magnitude_percentile = v;
        }
        if let Some(v) = self.take("registration.max_residual_rad")? {
            m.registration.max_residual_rad = v;
        }
        if let Some(v) = self.take("registration.allow_low_confidence")? {
            m.registration.allow_low_confidence = v;
        }
        let n = self.indexed_count("injected")?;
        m.injected = (0..n)
            .map(|k| self.shift("injected", k))
            .collect::<Result<_, _>>()?;
        m.input = self.take("input")?;

        if let Some((key, (line, _))) = self.0.into_iter().next() {
            return Err(ManifestError {
                line: Some(line),
                key,
                message: "unknown key".into(),
            });
        }
        m.validate()?;
        Ok(m)
    }
}

struct Bsnr(Option<f64>);

impl FromStr for Bsnr {
    type Err = std::num::ParseFloatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "none" {
            Ok(Bsnr(None))
        } else {
            s.parse().map(|v| Bsnr(Some(v)))
        }
    }
}

struct Nsr(Option<f64>);

impl FromStr for Nsr {
    type Err = std::num::ParseFloatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            Ok(Nsr(None))
        } else {
            s.parse().map(|v| Nsr(Some(v)))
        }
    }
}

/// Parses `"dx,dy;dx,dy;..."`.
pub fn parse_shift_list(s: &str) -> Result<Vec<MotionVector>, String> {
    s.split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|pair| {
            let (a, b) = pair
                .split_once(',')
                .ok_or_else(|| format!("shift {pair:?} is not `dx,dy`"))?;
            let dx: f64 = a.trim().parse().map_err(|e| format!("shift {pair:?}: {e}"))?;
            let dy: f64 = b.trim().parse().map_err(|e| format!("shift {pair:?}: {e}"))?;
            if !dx.is_finite() || !dy.is_finite() {
                return Err(format!("shift {pair:?} is not finite"));
            }
            Ok(MotionVector::new(dx, dy))
        })
        .collect()
}
