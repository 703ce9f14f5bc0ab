//! Fusion of registered low-resolution frames onto the high-resolution lattice.
//!
//! Every LR pixel becomes a [`SamplePoint`] at its subpixel HR position. Each
//! HR pixel is then the weighted mean of its `k` nearest samples, each sample
//! weighted by a separable distance term `S = (1 - Δi)(1 - Δj)` and a gradient
//! term `W = (1 - μ G)^m`, where `G` is the local gradient of the sample in the
//! frame it came from. Samples on edges therefore pull less than samples in
//! flat regions at the same distance.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::degrade::MotionVector;
use crate::image::{local_gradient, normalized_gradient_magnitude, sobel_derivatives};
use crate::{Error, GrayImage, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    /// Row coordinate on the HR lattice, in HR pixels.
    pub pos_i: f64,
    /// Column coordinate on the HR lattice, in HR pixels.
    pub pos_j: f64,
    pub value: f64,
    pub grad: f64,
    pub frame_id: usize,
}

impl SamplePoint {
    #[inline]
    fn dist2(&self, i: f64, j: f64) -> f64 {
        let (di, dj) = (self.pos_i - i, self.pos_j - j);
        di * di + dj * dj
    }
}

/// Ranking used for neighbor selection: distance, then `(frame_id, pos_i, pos_j)`.
#[inline]
fn rank(a: &(f64, SamplePoint), b: &(f64, SamplePoint)) -> Ordering {
    a.0.total_cmp(&b.0)
        .then(a.1.frame_id.cmp(&b.1.frame_id))
        .then(a.1.pos_i.total_cmp(&b.1.pos_i))
        .then(a.1.pos_j.total_cmp(&b.1.pos_j))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientMode {
    /// The orientation ratio `(|fx| + |fy|) / (2 sqrt(fx² + fy²))`.
    #[default]
    Literal,
    /// Edge strength normalized by the strongest gradient of the source frame.
    NormalizedMagnitude,
}

impl GradientMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GradientMode::Literal => "literal",
            GradientMode::NormalizedMagnitude => "normalized_magnitude",
        }
    }
}

impl std::str::FromStr for GradientMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(GradientMode::Literal),
            "normalized_magnitude" => Ok(GradientMode::NormalizedMagnitude),
            other => Err(Error::invalid(
                "gradient_mode",
                format!("unknown mode {other:?} (literal|normalized_magnitude)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionParams {
    pub mu: f64,
    pub m: f64,
    /// Side of the initial search window, in HR cells.
    pub neighbor_window: usize,
    pub k_neighbors: usize,
    pub gradient_mode: GradientMode,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            mu: 0.9,
            m: 2.0,
            neighbor_window: 5,
            k_neighbors: 3,
            gradient_mode: GradientMode::Literal,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(Error::invalid("mu", format!("{} not in (0, 1)", self.mu)));
        }
        if !self.m.is_finite() || self.m <= 0.0 {
            return Err(Error::invalid("m", format!("{} must be positive", self.m)));
        }
        if self.neighbor_window < 3 || self.neighbor_window.is_multiple_of(2) {
            return Err(Error::invalid(
                "neighbor_window",
                format!("{} must be odd and at least 3", self.neighbor_window),
            ));
        }
        if self.k_neighbors == 0 {
            return Err(Error::invalid("k_neighbors", "must be at least 1"));
        }
        Ok(())
    }
}

/// Samples bucketed by the HR cell containing them (`floor` of each
/// coordinate). Buckets cover the lattice plus `ratio` cells of slack on every
/// side, which is also the range beyond which samples are discarded.
#[derive(Debug, Clone)]
pub struct HRGrid {
    hr_width: usize,
    hr_height: usize,
    ratio: usize,
    cell_rows: usize,
    cell_cols: usize,
    /// `starts[c]..starts[c + 1]` indexes the samples of cell `c`.
    starts: Vec<usize>,
    samples: Vec<SamplePoint>,
}

impl HRGrid {
    /// Buckets `samples`, dropping any that fall outside the slack bound
    /// `[-ratio, hr_height + ratio] x [-ratio, hr_width + ratio]`.
    pub fn from_samples(
        hr_width: usize,
        hr_height: usize,
        ratio: usize,
        samples: impl IntoIterator<Item = SamplePoint>,
    ) -> Result<Self> {
        if hr_width == 0 || hr_height == 0 || ratio == 0 {
            return Err(Error::Dimension(format!(
                "grid needs positive dimensions and ratio, got {hr_width}x{hr_height}, ratio {ratio}"
            )));
        }
        let slack = ratio as f64;
        let cell_rows = hr_height + 2 * ratio + 1;
        let cell_cols = hr_width + 2 * ratio + 1;
        let mut keyed: Vec<(usize, SamplePoint)> = samples
            .into_iter()
            .filter(|s| {
                s.pos_i >= -slack
                    && s.pos_i <= hr_height as f64 + slack
                    && s.pos_j >= -slack
                    && s.pos_j <= hr_width as f64 + slack
            })
            .map(|s| {
                let ci = (s.pos_i.floor() + slack) as usize;
                let cj = (s.pos_j.floor() + slack) as usize;
                (ci * cell_cols + cj, s)
            })
            .collect();
        // stable: samples keep insertion order within a cell
        keyed.sort_by_key(|(c, _)| *c);

        let mut starts = vec![0usize; cell_rows * cell_cols + 1];
        for (c, _) in &keyed {
            starts[c + 1] += 1;
        }
        for c in 0..cell_rows * cell_cols {
            starts[c + 1] += starts[c];
        }
        Ok(Self {
            hr_width,
            hr_height,
            ratio,
            cell_rows,
            cell_cols,
            starts,
            samples: keyed.into_iter().map(|(_, s)| s).collect(),
        })
    }

    pub fn hr_width(&self) -> usize {
        self.hr_width
    }

    pub fn hr_height(&self) -> usize {
        self.hr_height
    }

    pub fn ratio(&self) -> usize {
        self.ratio
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[SamplePoint] {
        &self.samples
    }

    /// Samples whose floored coordinates equal `(ci, cj)`. Empty outside the
    /// bucketed range.
    pub fn cell(&self, ci: isize, cj: isize) -> &[SamplePoint] {
        let r = ci + self.ratio as isize;
        let c = cj + self.ratio as isize;
        if r < 0 || c < 0 || r as usize >= self.cell_rows || c as usize >= self.cell_cols {
            return &[];
        }
        let idx = r as usize * self.cell_cols + c as usize;
        &self.samples[self.starts[idx]..self.starts[idx + 1]]
    }

    /// Whether a window of half-width `half` around `(i, j)` spans every bucket.
    fn window_covers_all(&self, i: isize, j: isize, half: isize) -> bool {
        let lo = -(self.ratio as isize);
        i - half <= lo
            && j - half <= lo
            && i + half >= lo + self.cell_rows as isize - 1
            && j + half >= lo + self.cell_cols as isize - 1
    }

    fn count_in_window(&self, i: isize, j: isize, half: isize) -> usize {
        (i - half..=i + half)
            .map(|ci| {
                (j - half..=j + half)
                    .map(|cj| self.cell(ci, cj).len())
                    .sum::<usize>()
            })
            .sum()
    }
}

/// Places LR pixel `(p, q)` of frame `k` at HR position
/// `ratio * (p - dx_k, q - dy_k)` and attaches its value and local gradient,
/// the gradient being computed in frame `k` itself.
pub fn build_grid(
    frames: &[GrayImage],
    shifts: &[MotionVector],
    ratio: usize,
    mode: GradientMode,
) -> Result<HRGrid> {
    if frames.len() != shifts.len() {
        return Err(Error::invalid(
            "shifts",
            format!("{} shifts for {} frames", shifts.len(), frames.len()),
        ));
    }
    let first = frames
        .first()
        .ok_or_else(|| Error::invalid("frames", "at least one frame is required"))?;
    if !shifts[0].is_zero() {
        return Err(Error::invalid("shifts", "reference shift must be (0, 0)"));
    }
    let (lw, lh) = first.dimensions();
    if let Some(k) = frames.iter().position(|f| f.dimensions() != (lw, lh)) {
        return Err(Error::Dimension(format!(
            "frame {k} is {}x{}, frame 0 is {lw}x{lh}",
            frames[k].width(),
            frames[k].height()
        )));
    }
    if ratio == 0 {
        return Err(Error::invalid("ratio", "must be positive"));
    }

    let per_frame: Vec<Vec<SamplePoint>> = frames
        .par_iter()
        .zip(shifts)
        .enumerate()
        .map(|(k, (frame, shift))| {
            let deriv = sobel_derivatives(frame)?;
            let grad = match mode {
                GradientMode::Literal => local_gradient(&deriv),
                GradientMode::NormalizedMagnitude => normalized_gradient_magnitude(&deriv),
            };
            let r = ratio as f64;
            let mut out = Vec::with_capacity(lw * lh);
            for p in 0..lh {
                for q in 0..lw {
                    out.push(SamplePoint {
                        pos_i: r * (p as f64 - shift.dx),
                        pos_j: r * (q as f64 - shift.dy),
                        value: frame.get(p, q),
                        grad: grad.get(p, q),
                        frame_id: k,
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    HRGrid::from_samples(lw * ratio, lh * ratio, ratio, per_frame.into_iter().flatten())
}

/// The `k_neighbors` samples closest to HR pixel `(i, j)` within the search
/// window, nearest first. The window starts at `neighbor_window` cells per
/// side and grows by two cells per side until it holds enough samples or
/// covers the whole grid.
pub fn nearest_neighbors(
    grid: &HRGrid,
    i: isize,
    j: isize,
    params: &FusionParams,
) -> Result<Vec<SamplePoint>> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut buf = Vec::new();
    collect_neighbors(grid, i as f64, j as f64, params, &mut buf);
    Ok(buf.into_iter().map(|(_, s)| s).collect())
}

/// Fills `buf` with `(squared distance, sample)` for the selected neighbors
/// of the point `(y, x)`; the search window is centred on the cell nearest
/// to it.
fn collect_neighbors(
    grid: &HRGrid,
    y: f64,
    x: f64,
    params: &FusionParams,
    buf: &mut Vec<(f64, SamplePoint)>,
) {
    let (i, j) = (y.round() as isize, x.round() as isize);
    let k = params.k_neighbors;
    let mut half = (params.neighbor_window / 2) as isize;
    while grid.count_in_window(i, j, half) < k && !grid.window_covers_all(i, j, half) {
        half += 2;
    }
    buf.clear();
    for ci in i - half..=i + half {
        for cj in j - half..=j + half {
            buf.extend(grid.cell(ci, cj).iter().map(|s| (s.dist2(y, x), *s)));
        }
    }
    if buf.len() > k {
        buf.select_nth_unstable_by(k - 1, rank);
        buf.truncate(k);
    }
    buf.sort_by(rank);
}

/// `S = (1 - Δi)(1 - Δj)` with offsets measured in LR pixels (HR offset
/// divided by `ratio`) and clamped to `[0, 1]`.
#[inline]
pub fn distance_weight(sample: &SamplePoint, i: isize, j: isize, ratio: usize) -> f64 {
    distance_weight_at(sample, i as f64, j as f64, ratio)
}

#[inline]
fn distance_weight_at(sample: &SamplePoint, y: f64, x: f64, ratio: usize) -> f64 {
    let r = ratio as f64;
    let di = ((sample.pos_i - y).abs() / r).min(1.0);
    let dj = ((sample.pos_j - x).abs() / r).min(1.0);
    (1.0 - di) * (1.0 - dj)
}

/// `W = (1 - μ G)^m`.
#[inline]
pub fn gradient_weight(grad: f64, params: &FusionParams) -> f64 {
    (1.0 - params.mu * grad).powf(params.m)
}

/// Below this total weight a pixel takes the value of its nearest sample.
pub const MIN_TOTAL_WEIGHT: f64 = 1e-12;

/// Evaluates every HR pixel as the `W·S`-weighted mean of its nearest
/// samples. Rows are processed in parallel; each pixel depends only on the
/// immutable grid, so the output does not depend on the thread count.
pub fn interpolate_hr(grid: &HRGrid, ratio: usize, params: &FusionParams) -> Result<GrayImage> {
    params.validate()?;
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let (w, h) = (grid.hr_width(), grid.hr_height());
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w)
        .enumerate()
        .for_each_init(Vec::new, |buf, (i, row)| {
            for (j, px) in row.iter_mut().enumerate() {
                *px = fuse_pixel(grid, i as isize, j as isize, ratio, params, buf);
            }
        });
    GrayImage::new(w, h, out)
}

/// Interpolated value at an arbitrary lattice position `(y, x)`, using the
/// same neighbor selection and weights as [`interpolate_hr`].
pub fn interpolate_at(grid: &HRGrid, y: f64, x: f64, ratio: usize, params: &FusionParams) -> Result<f64> {
    params.validate()?;
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(fuse_point(grid, y, x, ratio, params, &mut Vec::new()))
}

fn fuse_pixel(
    grid: &HRGrid,
    i: isize,
    j: isize,
    ratio: usize,
    params: &FusionParams,
    buf: &mut Vec<(f64, SamplePoint)>,
) -> f64 {
    fuse_point(grid, i as f64, j as f64, ratio, params, buf)
}

fn fuse_point(
    grid: &HRGrid,
    y: f64,
    x: f64,
    ratio: usize,
    params: &FusionParams,
    buf: &mut Vec<(f64, SamplePoint)>,
) -> f64 {
    collect_neighbors(grid, y, x, params, buf);
    // Accumulated as offsets from the nearest value so that constant
    // neighborhoods are reproduced exactly.
    let anchor = buf[0].1.value;
    let (mut num, mut den) = (0.0, 0.0);
    for (_, s) in buf.iter() {
        let wgt = gradient_weight(s.grad, params) * distance_weight_at(s, y, x, ratio);
        num += wgt * (s.value - anchor);
        den += wgt;
    }
    if den < MIN_TOTAL_WEIGHT {
        anchor
    } else {
        anchor + num / den
    }
}
