//! Counting local minima and SNN-GPPs along a fixed search direction under
//! repeated dynamic mini-batch sampling.
//!
//! An SNN-GPP shows up on a grid as a sign change of the directional
//! derivative from non-positive to positive between neighbouring points.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gols::{self, GolsConfig};
use crate::model::Architecture;
use crate::probe::{uniform_grid, LineProbe, ProbePoint};
use crate::rng;
use crate::sampler::{BatchSampler, SamplerMode};

/// Interior indices `i` with `F[i-1] > F[i] < F[i+1]`.
pub fn detect_minima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i - 1] > values[i] && values[i] < values[i + 1])
        .collect()
}

/// Indices `i` with `F'[i-1] <= 0 < F'[i]`.
pub fn detect_snngpp(slopes: &[f64]) -> Vec<usize> {
    (1..slopes.len()).filter(|&i| slopes[i - 1] <= 0.0 && slopes[i] > 0.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSpec {
    pub grid_points: usize,
    pub spacing: f64,
    pub repeats: usize,
    /// A batch size equal to the dataset size means full-batch evaluation.
    pub batch_sizes: Vec<usize>,
    /// Full-batch LS-SGD iterations applied to the initial point before scanning.
    pub warmup_iterations: usize,
    pub init_seed: u64,
    pub scan_seed: u64,
    /// Half-width, in cells, of the window around the optimum used for `frac_within`.
    pub window_cells: usize,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            grid_points: 100,
            spacing: 0.002,
            repeats: 100,
            batch_sizes: vec![10, 25, 50, 75, 100, 150],
            warmup_iterations: 0,
            init_seed: 0,
            scan_seed: 0,
            window_cells: 10,
        }
    }
}

impl ScanSpec {
    pub fn validate(&self, m: usize) -> Result<()> {
        if self.grid_points < 3 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 3 points for minima detection, got {}",
                self.grid_points
            )));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid spacing must be positive, got {}", self.spacing)));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidArgument("repeats must be at least 1".into()));
        }
        if self.batch_sizes.is_empty() {
            return Err(Error::InvalidArgument("no batch sizes given".into()));
        }
        if let Some(b) = self.batch_sizes.iter().find(|&&b| b == 0 || b > m) {
            return Err(Error::InvalidArgument(format!("batch size {b} outside 1..={m}")));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        uniform_grid(0.0, self.spacing, self.grid_points)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationHistogram {
    pub batch_size: usize,
    /// Completed repeats; counts divided by this give per-repeat averages.
    pub repeats: usize,
    pub skipped: usize,
    pub minima: Vec<usize>,
    pub snngpp: Vec<usize>,
}

/// Summary of one histogram. Spatial standard deviations are in units of alpha.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramSummary {
    pub batch_size: usize,
    pub repeats: usize,
    pub skipped: usize,
    pub mean_minima: f64,
    pub mean_snngpp: f64,
    pub minima_std: f64,
    pub snngpp_std: f64,
    /// `snngpp_std / minima_std`; NaN when there are no minima.
    pub std_ratio: f64,
    pub optimum_cell: Option<usize>,
    /// Fraction of SNN-GPP detections within `window_cells` of the optimum.
    pub frac_within: f64,
    /// Largest interior minima bin over the mean interior bin.
    pub max_bin_ratio: f64,
}

fn spatial_std(counts: &[usize], grid: &[f64]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return f64::NAN;
    }
    let n = total as f64;
    let mean = counts.iter().zip(grid).map(|(&c, a)| c as f64 * a).sum::<f64>() / n;
    let var = counts.iter().zip(grid).map(|(&c, a)| c as f64 * (a - mean).powi(2)).sum::<f64>() / n;
    var.sqrt()
}

impl LocalizationHistogram {
    pub fn summarize(&self, grid: &[f64], optimum_cell: Option<usize>, window_cells: usize) -> HistogramSummary {
        let reps = self.repeats.max(1) as f64;
        let total_min: usize = self.minima.iter().sum();
        let total_snn: usize = self.snngpp.iter().sum();
        let minima_std = spatial_std(&self.minima, grid);
        let snngpp_std = spatial_std(&self.snngpp, grid);
        let frac_within = match optimum_cell {
            Some(c) if total_snn > 0 => {
                let lo = c.saturating_sub(window_cells);
                let hi = (c + window_cells).min(self.snngpp.len() - 1);
                self.snngpp[lo..=hi].iter().sum::<usize>() as f64 / total_snn as f64
            }
            _ => 0.0,
        };
        // Interior cells only: minima cannot occur at the endpoints.
        let interior = &self.minima[1..self.minima.len() - 1];
        let max_bin = interior.iter().copied().max().unwrap_or(0) as f64;
        let mean_bin = total_min as f64 / interior.len() as f64;
        HistogramSummary {
            batch_size: self.batch_size,
            repeats: self.repeats,
            skipped: self.skipped,
            mean_minima: total_min as f64 / reps,
            mean_snngpp: total_snn as f64 / reps,
            minima_std,
            snngpp_std,
            std_ratio: snngpp_std / minima_std,
            optimum_cell,
            frac_within,
            max_bin_ratio: if mean_bin > 0.0 { max_bin / mean_bin } else { f64::NAN },
        }
    }

    /// Central interval of SNN-GPP detections holding at least `mass` of them.
    pub fn snngpp_band(&self, grid: &[f64], mass: f64) -> Option<(f64, f64)> {
        let total: usize = self.snngpp.iter().sum();
        if total == 0 {
            return None;
        }
        let tail = ((1.0 - mass) / 2.0 * total as f64).floor() as usize;
        let mut acc = 0;
        let lo = self.snngpp.iter().position(|&c| {
            acc += c;
            acc > tail
        })?;
        acc = 0;
        let hi = self.snngpp.len()
            - 1
            - self.snngpp.iter().rev().position(|&c| {
                acc += c;
                acc > tail
            })?;
        Some((grid[lo], grid[hi]))
    }
}

/// Starting point and direction shared by every scan of a study.
#[derive(Debug, Clone)]
pub struct ScanLine {
    pub origin: Vec<f64>,
    pub direction: Vec<f64>,
}

impl ScanLine {
    /// Initializes with `spec.init_seed`, runs the warm-up iterations, and
    /// takes the full-batch steepest-descent direction.
    pub fn prepare(arch: &Architecture, data: &Dataset, spec: &ScanSpec) -> Result<Self> {
        let all: Vec<usize> = (0..data.len()).collect();
        let mut x = arch.init_params(spec.init_seed);
        let cfg = GolsConfig::default();
        let mut guess = cfg.alpha_min;
        for _ in 0..spec.warmup_iterations {
            let d: Vec<f64> = arch.evaluate(&x.0, data, &all)?.gradient.iter().map(|g| -g).collect();
            let mut sampler = BatchSampler::new(SamplerMode::Full, data.len(), 0)?;
            let mut probe = LineProbe::new(arch, data, &mut sampler, &x.0, &d)?;
            let out = gols::search(&mut probe, guess, &cfg, None)?;
            x.axpy(out.alpha_accepted, &d);
            guess = out.alpha_accepted;
        }
        let direction = arch.evaluate(&x.0, data, &all)?.gradient.iter().map(|g| -g).collect();
        Ok(Self { origin: x.0, direction })
    }

    fn sampler_for(&self, batch_size: usize, m: usize, seed: u64) -> Result<BatchSampler> {
        let mode = if batch_size == m { SamplerMode::Full } else { SamplerMode::Dynamic { batch_size } };
        BatchSampler::new(mode, m, seed)
    }

    /// One scan over `grid`; a batch size equal to the dataset size scans full-batch.
    pub fn scan(
        &self,
        arch: &Architecture,
        data: &Dataset,
        batch_size: usize,
        seed: u64,
        grid: &[f64],
    ) -> Result<Vec<ProbePoint>> {
        let mut sampler = self.sampler_for(batch_size, data.len(), seed)?;
        LineProbe::new(arch, data, &mut sampler, &self.origin, &self.direction)?.scan(grid)
    }

    /// Runs GOLS-I once along this line with the given batch size.
    pub fn search(
        &self,
        arch: &Architecture,
        data: &Dataset,
        batch_size: usize,
        seed: u64,
        alpha_guess: f64,
        cfg: &GolsConfig,
    ) -> Result<gols::GolsOutcome> {
        let mut sampler = self.sampler_for(batch_size, data.len(), seed)?;
        let mut probe = LineProbe::new(arch, data, &mut sampler, &self.origin, &self.direction)?;
        gols::search(&mut probe, alpha_guess, cfg, None)
    }
}

/// Seed of repeat `r` at batch size `b`.
pub fn repeat_seed(spec: &ScanSpec, batch_size: usize, r: usize) -> u64 {
    rng::derive_seed(spec.scan_seed, batch_size as u64, r as u64)
}

#[derive(Debug, Clone)]
pub struct LocalizationStudy {
    pub grid: Vec<f64>,
    pub line: ScanLine,
    pub histograms: Vec<LocalizationHistogram>,
    /// SNN-GPP cell of the full-batch scan.
    pub optimum_cell: Option<usize>,
    pub full_batch_minima: Vec<usize>,
    pub full_batch_snngpp: Vec<usize>,
    pub window_cells: usize,
}

impl LocalizationStudy {
    pub fn summaries(&self) -> Vec<HistogramSummary> {
        self.histograms.iter().map(|h| h.summarize(&self.grid, self.optimum_cell, self.window_cells)).collect()
    }

    pub fn histogram(&self, batch_size: usize) -> Option<&LocalizationHistogram> {
        self.histograms.iter().find(|h| h.batch_size == batch_size)
    }
}

pub fn localization_study(arch: &Architecture, data: &Dataset, spec: &ScanSpec) -> Result<LocalizationStudy> {
    spec.validate(data.len())?;
    let grid = spec.grid();
    let line = ScanLine::prepare(arch, data, spec)?;
    let full = line.scan(arch, data, data.len(), 0, &grid)?;
    let full_batch_minima = detect_minima(&full.iter().map(|p| p.value).collect::<Vec<_>>());
    let full_batch_snngpp = detect_snngpp(&full.iter().map(|p| p.slope).collect::<Vec<_>>());
    let optimum_cell = full_batch_snngpp.first().copied();

    let mut histograms = Vec::with_capacity(spec.batch_sizes.len());
    for &b in &spec.batch_sizes {
        let mut h = LocalizationHistogram {
            batch_size: b,
            repeats: 0,
            skipped: 0,
            minima: vec![0; grid.len()],
            snngpp: vec![0; grid.len()],
        };
        for r in 0..spec.repeats {
            let pts = match line.scan(arch, data, b, repeat_seed(spec, b, r), &grid) {
                Ok(p) => p,
                Err(e) if e.is_numeric() => {
                    log::warn!("batch size {b}, repeat {r}: {e}");
                    h.skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            for i in detect_minima(&pts.iter().map(|p| p.value).collect::<Vec<_>>()) {
                h.minima[i] += 1;
            }
            for i in detect_snngpp(&pts.iter().map(|p| p.slope).collect::<Vec<_>>()) {
                h.snngpp[i] += 1;
            }
            h.repeats += 1;
        }
        histograms.push(h);
    }
    Ok(LocalizationStudy {
        grid,
        line,
        histograms,
        optimum_cell,
        full_batch_minima,
        full_batch_snngpp,
        window_cells: spec.window_cells,
    })
}

pub const HISTOGRAM_HEADER: &str = "batch_size,cell_index,alpha,minima_count,snngpp_count";
pub const SUMMARY_HEADER: &str = "batch_size,repeats,skipped,mean_minima,mean_snngpp,minima_std,snngpp_std,std_ratio,optimum_cell,frac_within,max_bin_ratio";

pub fn write_histogram_csv<W: Write>(mut w: W, h: &LocalizationHistogram, grid: &[f64]) -> io::Result<()> {
    writeln!(w, "{HISTOGRAM_HEADER}")?;
    for (i, a) in grid.iter().enumerate() {
        writeln!(w, "{},{},{},{},{}", h.batch_size, i, a, h.minima[i], h.snngpp[i])?;
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(mut w: W, rows: &[HistogramSummary]) -> io::Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for s in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            s.batch_size,
            s.repeats,
            s.skipped,
            s.mean_minima,
            s.mean_snngpp,
            s.minima_std,
            s.snngpp_std,
            s.std_ratio,
            s.optimum_cell.map(|c| c.to_string()).unwrap_or_default(),
            s.frac_within,
            s.max_bin_ratio
        )?;
    }
    Ok(())
}
