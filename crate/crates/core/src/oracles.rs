//! Independent reference computations for the test suite.
//!
//! Nothing here calls into the backward pass: the finite-difference
//! gradient runs its own per-sample forward pass straight off the flat
//! parameter vector, and the sign-change search is a plain grid walk.

use ndarray::Array2;
use rand_distr::{Distribution, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{Activation, Architecture, LossKind};
use crate::rng;

/// Default finite-difference step.
pub const FD_STEP: f64 = 1e-6;

/// Largest dataset [`exhaustive_expectation`] will enumerate.
pub const MAX_ENUMERATION: usize = 1000;

fn check_step(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {h}")))
    }
}

/// Central differences `(f(x + h e_j) - f(x - h e_j)) / 2h` for each `j` in `coords`.
pub fn central_difference_at<F>(f: F, x: &[f64], h: f64, coords: &[usize]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    check_step(h)?;
    let mut probe = x.to_vec();
    coords
        .iter()
        .map(|&j| {
            probe[j] = x[j] + h;
            let up = f(&probe)?;
            probe[j] = x[j] - h;
            let down = f(&probe)?;
            probe[j] = x[j];
            Ok((up - down) / (2.0 * h))
        })
        .collect()
}

/// Central-difference gradient over every coordinate.
pub fn central_difference<F>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let all: Vec<usize> = (0..x.len()).collect();
    central_difference_at(f, x, h, &all)
}

fn activate(kind: Activation, z: f64) -> f64 {
    match kind {
        Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        Activation::Tanh => z.tanh(),
        Activation::Identity => z,
    }
}

/// `ln(1 + e^z)`, switching to the asymptote for large `z`.
fn log1pexp(z: f64) -> f64 {
    if z > 30.0 {
        z + (-z).exp()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean batch loss computed one sample at a time with explicit loops.
pub fn reference_loss(a: &Architecture, x: &[f64], d: &Dataset, batch: &[usize]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if x.len() != a.param_count() {
        return Err(Error::InvalidArgument("parameter length mismatch".into()));
    }
    let widths = &a.layer_widths;
    let layers = widths.len() - 1;
    let mut total = 0.0;
    for &b in batch {
        let mut act: Vec<f64> = d.inputs().row(b).to_vec();
        let mut offset = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let bias_at = offset + fan_in * fan_out;
            let kind = if l + 1 == layers { a.output_activation } else { a.hidden_activation };
            let next: Vec<f64> = (0..fan_out)
                .map(|o| {
                    let row = &x[offset + o * fan_in..offset + (o + 1) * fan_in];
                    let z = row.iter().zip(&act).map(|(w, v)| w * v).sum::<f64>() + x[bias_at + o];
                    activate(kind, z)
                })
                .collect();
            offset = bias_at + fan_out;
            act = next;
        }
        let target = d.targets().row(b);
        let k = act.len() as f64;
        let sample: f64 = match a.loss {
            LossKind::Bce => act
                .iter()
                .zip(target.iter())
                .map(|(&z, &t)| t * log1pexp(-z) + (1.0 - t) * log1pexp(z))
                .sum::<f64>(),
            LossKind::Mse => act.iter().zip(target.iter()).map(|(o, t)| (o - t) * (o - t)).sum::<f64>(),
        };
        total += sample / k;
    }
    let loss = total / batch.len() as f64;
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFiniteLayer { layer: layers })
    }
}

/// Finite-difference gradient of the batch loss over all parameters.
pub fn fd_gradient(a: &Architecture, x: &[f64], d: &Dataset, batch: &[usize], h: f64) -> Result<Vec<f64>> {
    central_difference(|p| reference_loss(a, p, d, batch), x, h)
}

/// Finite-difference partial derivatives for a subset of coordinates.
pub fn fd_gradient_at(
    a: &Architecture,
    x: &[f64],
    d: &Dataset,
    batch: &[usize],
    h: f64,
    coords: &[usize],
) -> Result<Vec<f64>> {
    central_difference_at(|p| reference_loss(a, p, d, batch), x, h, coords)
}

/// Backprop against central differences on `coords` (all parameters when
/// `None`); returns the largest relative error.
pub fn gradient_check(
    a: &Architecture,
    x: &[f64],
    d: &Dataset,
    batch: &[usize],
    coords: Option<&[usize]>,
) -> Result<f64> {
    let backprop = a.evaluate(x, d, batch)?.gradient;
    match coords {
        Some(c) => {
            let fd = fd_gradient_at(a, x, d, batch, FD_STEP, c)?;
            let bp: Vec<f64> = c.iter().map(|&j| backprop[j]).collect();
            Ok(max_relative_error(&bp, &fd))
        }
        None => Ok(max_relative_error(&backprop, &fd_gradient(a, x, d, batch, FD_STEP)?)),
    }
}

/// Gaussian inputs with random class targets: one-hot for several outputs,
/// a single {0,1} column for one output.
pub fn synthetic_dataset(rows: usize, input_dim: usize, output_dim: usize, seed: u64) -> Dataset {
    let mut r = rng::seeded(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let inputs = Array2::from_shape_fn((rows, input_dim), |_| normal.sample(&mut r));
    let mut targets = Array2::zeros((rows, output_dim));
    for i in 0..rows {
        if output_dim == 1 {
            targets[[i, 0]] = rng::uniform_index(&mut r, 2) as f64;
        } else {
            targets[[i, rng::uniform_index(&mut r, output_dim)]] = 1.0;
        }
    }
    Dataset::new("synthetic", inputs, targets).expect("shapes agree")
}

/// `max_j |a_j - b_j| / max(1, |b_j|)`.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs().max(1.0)).fold(0.0, f64::max)
}

/// First grid point `alpha` on `steps` evenly spaced points of `[lo, hi]`
/// with `fprime(previous) < 0 <= fprime(alpha)`.
pub fn brute_sign_change<F>(fprime: F, lo: f64, hi: f64, steps: usize) -> Result<Option<f64>>
where
    F: Fn(f64) -> f64,
{
    if lo.is_nan() || hi.is_nan() || lo >= hi || steps < 2 {
        return Err(Error::InvalidArgument(format!("need lo < hi and steps >= 2, got [{lo}, {hi}] x {steps}")));
    }
    let dx = (hi - lo) / (steps - 1) as f64;
    let mut prev = fprime(lo);
    for i in 1..steps {
        let alpha = lo + dx * i as f64;
        let cur = fprime(alpha);
        if prev < 0.0 && cur >= 0.0 {
            return Ok(Some(alpha));
        }
        prev = cur;
    }
    Ok(None)
}

/// Walks `alpha0 * eta^k` for `k = 1, 2, ...` and returns the first step
/// with `fprime >= 0` together with `k`, stopping early once a step exceeds
/// `alpha_max / eta`. This is the growth phase of the line search, written
/// as a closed loop over powers.
pub fn doubling_walk<F>(fprime: F, alpha0: f64, eta: f64, alpha_max: f64) -> (f64, usize)
where
    F: Fn(f64) -> f64,
{
    let mut k = 0usize;
    loop {
        k += 1;
        let alpha = (alpha0 * eta.powi(k as i32)).min(alpha_max);
        if fprime(alpha) >= 0.0 || alpha > alpha_max / eta {
            return (alpha, k);
        }
    }
}

/// Average of all M singleton-batch evaluations: an enumeration of the
/// expectation of the sub-sampled loss and gradient.
pub fn exhaustive_expectation(a: &Architecture, x: &[f64], d: &Dataset) -> Result<(f64, Vec<f64>)> {
    let m = d.len();
    if m == 0 {
        return Err(Error::EmptyBatch);
    }
    if m > MAX_ENUMERATION {
        return Err(Error::InvalidArgument(format!("refusing to enumerate {m} > {MAX_ENUMERATION} singleton batches")));
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; a.param_count()];
    for i in 0..m {
        let r = a.evaluate(x, d, &[i])?;
        loss += r.loss;
        for (g, v) in grad.iter_mut().zip(&r.gradient) {
            *g += v;
        }
    }
    let inv = 1.0 / m as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    Ok((loss * inv, grad))
}
