//! Univariate views `F(alpha) = L(x + alpha d)` and `F'(alpha) = d . g(x + alpha d)`.
//!
//! Each evaluation draws one batch from the sampler and computes the value
//! and the directional derivative from that same batch.

use std::io::{self, Write};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gols::SlopeProbe;
use crate::model::Architecture;
use crate::sampler::BatchSampler;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbePoint {
    pub alpha: f64,
    /// F(alpha), the batch loss.
    pub value: f64,
    /// F'(alpha), the directional derivative on the same batch.
    pub slope: f64,
    /// Sampler sequence number of the batch used.
    pub batch_seq: u64,
}

pub struct LineProbe<'a> {
    arch: &'a Architecture,
    data: &'a Dataset,
    sampler: &'a mut BatchSampler,
    origin: &'a [f64],
    direction: &'a [f64],
    direction_norm: f64,
    point: Vec<f64>,
    evals: usize,
    last_gradient: Option<Vec<f64>>,
    last_point: Option<ProbePoint>,
}

impl<'a> LineProbe<'a> {
    pub fn new(
        arch: &'a Architecture,
        data: &'a Dataset,
        sampler: &'a mut BatchSampler,
        origin: &'a [f64],
        direction: &'a [f64],
    ) -> Result<Self> {
        let p = arch.param_count();
        if origin.len() != p || direction.len() != p {
            return Err(Error::InvalidArgument(format!(
                "origin/direction lengths {}/{} do not match p = {p}",
                origin.len(),
                direction.len()
            )));
        }
        if sampler.population() != data.len() {
            return Err(Error::InvalidArgument("sampler population differs from dataset size".into()));
        }
        let direction_norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(Self {
            arch,
            data,
            sampler,
            origin,
            direction,
            direction_norm,
            point: origin.to_vec(),
            evals: 0,
            last_gradient: None,
            last_point: None,
        })
    }

    /// Number of value+gradient evaluations performed so far.
    pub fn evals(&self) -> usize {
        self.evals
    }

    /// Gradient from the most recent evaluation.
    pub fn last_gradient(&self) -> Option<&[f64]> {
        self.last_gradient.as_deref()
    }

    pub fn last_point(&self) -> Option<ProbePoint> {
        self.last_point
    }

    pub fn take_last_gradient(&mut self) -> Option<Vec<f64>> {
        self.last_gradient.take()
    }

    pub fn eval_at(&mut self, alpha: f64) -> Result<ProbePoint> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("probe step must be finite and >= 0, got {alpha}")));
        }
        for ((p, x), d) in self.point.iter_mut().zip(self.origin).zip(self.direction) {
            *p = x + alpha * d;
        }
        let batch = self.sampler.draw();
        self.evals += 1;
        let r = self.arch.evaluate(&self.point, self.data, &batch)?;
        let slope = r.gradient.iter().zip(self.direction).map(|(g, d)| g * d).sum();
        self.last_gradient = Some(r.gradient);
        let pt = ProbePoint { alpha, value: r.loss, slope, batch_seq: self.sampler.batch_seq() };
        self.last_point = Some(pt);
        Ok(pt)
    }

    /// Evaluates every grid point in order. The grid must be ascending.
    pub fn scan(&mut self, grid: &[f64]) -> Result<Vec<ProbePoint>> {
        if grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("scan grid must be sorted ascending".into()));
        }
        grid.iter().map(|&a| self.eval_at(a)).collect()
    }
}

impl SlopeProbe for LineProbe<'_> {
    fn slope(&mut self, alpha: f64) -> Result<f64> {
        Ok(self.eval_at(alpha)?.slope)
    }

    fn direction_norm(&self) -> f64 {
        self.direction_norm
    }
}

/// `n` points `start, start + spacing, ...`.
pub fn uniform_grid(start: f64, spacing: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| start + spacing * i as f64).collect()
}

/// Writes `alpha,F,Fprime,batch_seq` rows with a header.
pub fn write_scan_csv<W: Write>(mut w: W, points: &[ProbePoint]) -> io::Result<()> {
    writeln!(w, "alpha,F,Fprime,batch_seq")?;
    for p in points {
        writeln!(w, "{},{},{},{}", p.alpha, p.value, p.slope, p.batch_seq)?;
    }
    Ok(())
}
