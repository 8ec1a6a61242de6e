//! GOLS-I: a gradient-only inexact line search.
//!
//! The search only looks at directional derivatives. Starting from the
//! incoming guess it either accepts immediately, grows the step by `eta`
//! until the derivative turns non-negative, or shrinks it by `eta` until the
//! derivative turns negative. Steps are kept inside
//! `[alpha_min, min(1 / |d|, alpha_max_cap)]`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Something that can report `F'(alpha)` along a fixed direction.
///
/// Every call to [`slope`](SlopeProbe::slope) counts as one function evaluation.
pub trait SlopeProbe {
    fn slope(&mut self, alpha: f64) -> Result<f64>;
    fn direction_norm(&self) -> f64;
}

/// A deterministic `F'` given by a closure, for tests and oracles.
pub struct SlopeFn<F> {
    pub fprime: F,
    pub norm: f64,
    pub calls: usize,
}

impl<F: FnMut(f64) -> f64> SlopeFn<F> {
    pub fn new(fprime: F, norm: f64) -> Self {
        Self { fprime, norm, calls: 0 }
    }
}

impl<F: FnMut(f64) -> f64> SlopeProbe for SlopeFn<F> {
    fn slope(&mut self, alpha: f64) -> Result<f64> {
        self.calls += 1;
        Ok((self.fprime)(alpha))
    }

    fn direction_norm(&self) -> f64 {
        self.norm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GolsConfig {
    /// Growth/shrink factor, > 1.
    pub eta: f64,
    /// Initial-accept tolerance factor on |F'(0)|.
    pub c2: f64,
    pub alpha_min: f64,
    pub alpha_max_cap: f64,
    /// Take F'(0) from the previous iteration's final gradient instead of
    /// spending an evaluation on it.
    pub reuse_prev_gradient: bool,
}

impl Default for GolsConfig {
    fn default() -> Self {
        Self { eta: 2.0, c2: 0.9, alpha_min: 1e-8, alpha_max_cap: 1e7, reuse_prev_gradient: true }
    }
}

impl GolsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 1.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta must exceed 1, got {}", self.eta)));
        }
        if !(self.c2 > 0.0 && self.c2.is_finite()) {
            return Err(Error::InvalidArgument(format!("c2 must be positive, got {}", self.c2)));
        }
        if !(self.alpha_min > 0.0 && self.alpha_min < self.alpha_max_cap && self.alpha_max_cap.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < alpha_min < alpha_max_cap, got {} and {}",
                self.alpha_min, self.alpha_max_cap
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Termination {
    ImmediateAccept,
    SignChangeUp,
    SignChangeDown,
    MaxAlphaClamp,
    MinAlphaClamp,
}

impl Termination {
    pub const ALL: [Termination; 5] = [
        Termination::ImmediateAccept,
        Termination::SignChangeUp,
        Termination::SignChangeDown,
        Termination::MaxAlphaClamp,
        Termination::MinAlphaClamp,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::ImmediateAccept => "ImmediateAccept",
            Termination::SignChangeUp => "SignChangeUp",
            Termination::SignChangeDown => "SignChangeDown",
            Termination::MaxAlphaClamp => "MaxAlphaClamp",
            Termination::MinAlphaClamp => "MinAlphaClamp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GolsOutcome {
    pub alpha_accepted: f64,
    /// Evaluations spent in this call (I_n).
    pub evals: usize,
    pub termination: Termination,
    pub fprime_at_zero: f64,
    pub fprime_at_accept: f64,
}

/// Largest admissible step: `min(1 / |d|, cap)`, or the cap for a zero direction.
pub fn alpha_max_from_norm(norm: f64, cfg: &GolsConfig) -> f64 {
    if norm > 0.0 {
        (1.0 / norm).min(cfg.alpha_max_cap)
    } else {
        cfg.alpha_max_cap
    }
}

pub fn alpha_max_for(direction: &[f64], cfg: &GolsConfig) -> f64 {
    alpha_max_from_norm(direction.iter().map(|v| v * v).sum::<f64>().sqrt(), cfg)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Phase {
    Accept,
    Grow,
    Shrink,
}

/// Runs one line search along the probe's direction.
///
/// `reuse_f0` supplies F'(0) for free (the previous accepted gradient
/// projected on the new direction); otherwise it costs one evaluation.
/// The returned step is always the last one evaluated.
pub fn search<P: SlopeProbe>(
    probe: &mut P,
    alpha_guess: f64,
    cfg: &GolsConfig,
    reuse_f0: Option<f64>,
) -> Result<GolsOutcome> {
    cfg.validate()?;
    if !(alpha_guess > 0.0 && alpha_guess.is_finite()) {
        return Err(Error::InvalidArgument(format!("initial step must be positive, got {alpha_guess}")));
    }
    let mut evals = 0usize;
    let mut eval = |probe: &mut P, alpha: f64| -> Result<f64> {
        evals += 1;
        let v = probe.slope(alpha)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteSlope { alpha })
        }
    };

    let norm = probe.direction_norm();
    if norm == 0.0 {
        log::warn!("zero search direction; returning alpha_min");
        let at_min = eval(probe, cfg.alpha_min)?;
        return Ok(GolsOutcome {
            alpha_accepted: cfg.alpha_min,
            evals: 1,
            termination: Termination::MinAlphaClamp,
            fprime_at_zero: reuse_f0.unwrap_or(at_min),
            fprime_at_accept: at_min,
        });
    }
    let alpha_max = alpha_max_from_norm(norm, cfg).max(cfg.alpha_min);
    let (eta, alpha_min) = (cfg.eta, cfg.alpha_min);

    let f0 = match reuse_f0 {
        Some(v) => v,
        None => eval(probe, 0.0)?,
    };
    let mut alpha = alpha_guess.min(alpha_max).max(alpha_min);
    let mut slope = eval(probe, alpha)?;
    let tol_dd = (cfg.c2 * f0).abs();

    // Conditions in listed order; the immediate accept is checked last and wins.
    // A zero derivative falls through to shrinking, like the initial flag.
    let mut phase = Phase::Shrink;
    if slope < 0.0 {
        phase = Phase::Grow;
    }
    if slope > 0.0 && slope < tol_dd {
        phase = Phase::Accept;
    }

    let termination = match phase {
        Phase::Accept => Termination::ImmediateAccept,
        Phase::Grow if alpha > alpha_max / eta => Termination::MaxAlphaClamp,
        Phase::Shrink if alpha < alpha_min * eta => Termination::MinAlphaClamp,
        Phase::Grow => loop {
            alpha = (alpha * eta).min(alpha_max);
            slope = eval(probe, alpha)?;
            if slope >= 0.0 {
                break Termination::SignChangeUp;
            }
            if alpha > alpha_max / eta {
                break Termination::MaxAlphaClamp;
            }
        },
        Phase::Shrink => loop {
            alpha = (alpha / eta).max(alpha_min);
            slope = eval(probe, alpha)?;
            if slope < 0.0 {
                break Termination::SignChangeDown;
            }
            if alpha < alpha_min * eta {
                break Termination::MinAlphaClamp;
            }
        },
    };

    Ok(GolsOutcome { alpha_accepted: alpha, evals, termination, fprime_at_zero: f0, fprime_at_accept: slope })
}
