//! LS-SGD with GOLS-I and fixed-step SGD, logging one record per iteration.
//!
//! Cost is counted in function evaluations (one value+gradient on one
//! batch). Every iteration spends one evaluation on the gradient that
//! defines the steepest-descent direction; the line search adds its own
//! I_n on top. Metrics (full training loss, classification errors) are
//! computed outside the budget.

use std::fmt;
use std::io::{self, Write};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gols::{self, GolsConfig, Termination};
use crate::model::{Architecture, ParamVector};
use crate::probe::LineProbe;
use crate::rng;
use crate::sampler::{BatchSampler, SamplerMode};

/// Batch losses above this count as divergence.
pub const DIVERGENCE_LOSS: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Optimizer {
    GolsI(GolsConfig),
    FixedStep { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub run_id: String,
    pub arch: Architecture,
    pub sampler: SamplerMode,
    pub optimizer: Optimizer,
    pub max_func_evals: usize,
    /// Metrics are refreshed every `metric_cadence` function evaluations.
    pub metric_cadence: usize,
    pub init_seed: u64,
    pub sampler_seed: u64,
    /// Rows used for loss and error metrics; `None` means all of them.
    pub error_subsample: Option<usize>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        if self.max_func_evals == 0 {
            return Err(Error::InvalidArgument("max_func_evals must be positive".into()));
        }
        if self.metric_cadence == 0 {
            return Err(Error::InvalidArgument("metric_cadence must be at least 1".into()));
        }
        match self.optimizer {
            Optimizer::GolsI(cfg) => cfg.validate(),
            Optimizer::FixedStep { alpha } if !alpha.is_finite() => {
                Err(Error::InvalidArgument(format!("fixed step {alpha} is not finite")))
            }
            Optimizer::FixedStep { .. } => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepTag {
    Gols(Termination),
    Fixed,
    Diverged,
}

impl fmt::Display for StepTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepTag::Gols(t) => t.fmt(f),
            StepTag::Fixed => f.write_str("Fixed"),
            StepTag::Diverged => f.write_str("Diverged"),
        }
    }
}

impl StepTag {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Fixed" => Some(StepTag::Fixed),
            "Diverged" => Some(StepTag::Diverged),
            other => Termination::parse(other).map(StepTag::Gols),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub iteration: usize,
    /// Function evaluations used so far, including this iteration.
    pub cum_fe: usize,
    /// Training loss at x_{n+1} over the metric rows, when metrics were due.
    pub loss: Option<f64>,
    pub train_err: Option<f64>,
    pub test_err: Option<f64>,
    pub alpha: f64,
    /// Line-search evaluations this iteration (I_n); 1 for fixed steps.
    pub evals: usize,
    pub tag: StepTag,
    /// Loss seen by the optimizer on its last batch of the iteration.
    pub batch_loss: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<TrainRecord>,
    pub diverged: bool,
    pub params: ParamVector,
}

impl RunOutcome {
    /// Last logged training loss.
    pub fn final_loss(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.loss)
    }
}

struct Metrics<'a> {
    arch: &'a Architecture,
    train: &'a Dataset,
    test: &'a Dataset,
    train_rows: Vec<usize>,
    test_rows: Vec<usize>,
    cadence: usize,
    next_due: usize,
}

impl<'a> Metrics<'a> {
    fn new(cfg: &'a RunConfig, train: &'a Dataset, test: &'a Dataset) -> Self {
        let mut r = rng::seeded(rng::derive_seed(cfg.sampler_seed, 1, 0));
        let mut pick = |m: usize| -> Vec<usize> {
            match cfg.error_subsample {
                Some(k) if k < m => {
                    let mut v = index::sample(&mut r, m, k).into_vec();
                    v.sort_unstable();
                    v
                }
                _ => (0..m).collect(),
            }
        };
        let train_rows = pick(train.len());
        let test_rows = pick(test.len());
        Self { arch: &cfg.arch, train, test, train_rows, test_rows, cadence: cfg.metric_cadence, next_due: 0 }
    }

    /// Fills the metric fields when due (or when `force`). Returns false on numeric breakdown.
    fn fill(&mut self, rec: &mut TrainRecord, x: &[f64], force: bool) -> bool {
        if !(force || rec.cum_fe >= self.next_due) {
            return true;
        }
        self.next_due = (rec.cum_fe / self.cadence + 1) * self.cadence;
        let loss = match self.arch.loss(x, self.train, &self.train_rows) {
            Ok(l) if l <= DIVERGENCE_LOSS => l,
            _ => return false,
        };
        rec.loss = Some(loss);
        rec.train_err = self.arch.classification_error(x, self.train, Some(&self.train_rows)).ok();
        rec.test_err = self.arch.classification_error(x, self.test, Some(&self.test_rows)).ok();
        true
    }
}

fn diverged_record(iteration: usize, cum_fe: usize, alpha: f64, evals: usize, batch_loss: f64) -> TrainRecord {
    TrainRecord {
        iteration,
        cum_fe,
        loss: None,
        train_err: None,
        test_err: None,
        alpha,
        evals,
        tag: StepTag::Diverged,
        batch_loss,
    }
}

/// Dispatches on the configured optimizer.
pub fn run(cfg: &RunConfig, train: &Dataset, test: &Dataset) -> Result<RunOutcome> {
    match cfg.optimizer {
        Optimizer::GolsI(_) => run_lssgd(cfg, train, test),
        Optimizer::FixedStep { .. } => run_fixed(cfg, train, test),
    }
}

fn start(cfg: &RunConfig, train: &Dataset) -> Result<(ParamVector, BatchSampler)> {
    cfg.validate()?;
    if train.input_dim() != cfg.arch.input_dim() || train.output_dim() != cfg.arch.output_dim() {
        return Err(Error::InvalidArgument("training data does not match the architecture".into()));
    }
    Ok((cfg.arch.init_params(cfg.init_seed), BatchSampler::new(cfg.sampler, train.len(), cfg.sampler_seed)?))
}

/// Steepest descent with step sizes from GOLS-I.
pub fn run_lssgd(cfg: &RunConfig, train: &Dataset, test: &Dataset) -> Result<RunOutcome> {
    let Optimizer::GolsI(gcfg) = cfg.optimizer else {
        return Err(Error::InvalidArgument("run_lssgd needs a GOLS-I optimizer".into()));
    };
    let (mut x, mut sampler) = start(cfg, train)?;
    let mut metrics = Metrics::new(cfg, train, test);
    let mut records = Vec::new();
    let mut cum_fe = 0usize;
    let mut guess = gcfg.alpha_min;
    let mut saved_gradient: Option<Vec<f64>> = None;

    for n in 0.. {
        if cum_fe >= cfg.max_func_evals {
            break;
        }
        if matches!(cfg.sampler, SamplerMode::Static { .. }) {
            sampler.refresh(n)?;
        }
        let batch = sampler.draw();
        cum_fe += 1;
        let direction: Vec<f64> = match cfg.arch.evaluate(&x.0, train, &batch) {
            Ok(r) if r.loss <= DIVERGENCE_LOSS => r.gradient.into_iter().map(|g| -g).collect(),
            Ok(r) => {
                records.push(diverged_record(n, cum_fe, f64::NAN, 0, r.loss));
                return Ok(RunOutcome { records, diverged: true, params: x });
            }
            Err(e) if e.is_numeric() => {
                records.push(diverged_record(n, cum_fe, f64::NAN, 0, f64::NAN));
                return Ok(RunOutcome { records, diverged: true, params: x });
            }
            Err(e) => return Err(e),
        };
        let reuse_f0 = match (&saved_gradient, gcfg.reuse_prev_gradient) {
            (Some(g), true) => Some(g.iter().zip(&direction).map(|(a, b)| a * b).sum()),
            _ => None,
        };

        let mut probe = LineProbe::new(&cfg.arch, train, &mut sampler, &x.0, &direction)?;
        let outcome = gols::search(&mut probe, guess, &gcfg, reuse_f0);
        let spent = probe.evals();
        let last_point = probe.last_point();
        saved_gradient = probe.take_last_gradient();
        drop(probe);
        cum_fe += spent;

        let out = match outcome {
            Ok(out) => out,
            Err(e) if e.is_numeric() => {
                let bl = last_point.map_or(f64::NAN, |p| p.value);
                records.push(diverged_record(n, cum_fe, f64::NAN, spent, bl));
                return Ok(RunOutcome { records, diverged: true, params: x });
            }
            Err(e) => return Err(e),
        };
        x.axpy(out.alpha_accepted, &direction);
        guess = out.alpha_accepted;
        let batch_loss = last_point.map_or(f64::NAN, |p| p.value);

        let mut rec = TrainRecord {
            iteration: n,
            cum_fe,
            loss: None,
            train_err: None,
            test_err: None,
            alpha: out.alpha_accepted,
            evals: out.evals,
            tag: StepTag::Gols(out.termination),
            batch_loss,
        };
        let last = cum_fe >= cfg.max_func_evals;
        if batch_loss > DIVERGENCE_LOSS || !metrics.fill(&mut rec, &x.0, last) {
            rec.tag = StepTag::Diverged;
            records.push(rec);
            return Ok(RunOutcome { records, diverged: true, params: x });
        }
        records.push(rec);
    }
    Ok(RunOutcome { records, diverged: false, params: x })
}

/// Plain SGD `x <- x - alpha g(x)` with one evaluation per iteration.
pub fn run_fixed(cfg: &RunConfig, train: &Dataset, test: &Dataset) -> Result<RunOutcome> {
    let Optimizer::FixedStep { alpha } = cfg.optimizer else {
        return Err(Error::InvalidArgument("run_fixed needs a fixed-step optimizer".into()));
    };
    let (mut x, mut sampler) = start(cfg, train)?;
    let mut metrics = Metrics::new(cfg, train, test);
    let mut records = Vec::new();

    for n in 0..cfg.max_func_evals {
        if matches!(cfg.sampler, SamplerMode::Static { .. }) {
            sampler.refresh(n)?;
        }
        let batch = sampler.draw();
        let cum_fe = n + 1;
        let r = match cfg.arch.evaluate(&x.0, train, &batch) {
            Ok(r) if r.loss <= DIVERGENCE_LOSS => r,
            Ok(r) => {
                records.push(diverged_record(n, cum_fe, alpha, 1, r.loss));
                return Ok(RunOutcome { records, diverged: true, params: x });
            }
            Err(e) if e.is_numeric() => {
                records.push(diverged_record(n, cum_fe, alpha, 1, f64::NAN));
                return Ok(RunOutcome { records, diverged: true, params: x });
            }
            Err(e) => return Err(e),
        };
        x.axpy(-alpha, &r.gradient);
        let mut rec = TrainRecord {
            iteration: n,
            cum_fe,
            loss: None,
            train_err: None,
            test_err: None,
            alpha,
            evals: 1,
            tag: StepTag::Fixed,
            batch_loss: r.loss,
        };
        if !metrics.fill(&mut rec, &x.0, cum_fe == cfg.max_func_evals) {
            rec.tag = StepTag::Diverged;
            records.push(rec);
            return Ok(RunOutcome { records, diverged: true, params: x });
        }
        records.push(rec);
    }
    Ok(RunOutcome { records, diverged: false, params: x })
}

/// Column header of run CSV files.
pub const CSV_HEADER: &str = "run_id,n,cum_fe,loss,train_err,test_err,alpha,evals,term,batch_loss";

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_records_csv<W: Write>(mut w: W, run_id: &str, records: &[TrainRecord]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            run_id,
            r.iteration,
            r.cum_fe,
            opt(r.loss),
            opt(r.train_err),
            opt(r.test_err),
            r.alpha,
            r.evals,
            r.tag,
            r.batch_loss
        )?;
    }
    Ok(())
}

/// Parses a file written by [`write_records_csv`]. Returns the run id and records.
pub fn parse_records_csv(text: &str) -> Result<(String, Vec<TrainRecord>)> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(Error::Parse { line: 1, msg: "missing run CSV header".into() }),
    }
    let mut run_id = String::new();
    let mut records = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(Error::Parse { line: line_no, msg: format!("expected 10 fields, found {}", f.len()) });
        }
        let bad = |what: &str| Error::Parse { line: line_no, msg: format!("bad {what}") };
        let num = |s: &str, what: &str| s.parse::<f64>().map_err(|_| bad(what));
        let opt_num = |s: &str, what: &str| if s.is_empty() { Ok(None) } else { num(s, what).map(Some) };
        run_id = f[0].to_string();
        records.push(TrainRecord {
            iteration: f[1].parse().map_err(|_| bad("n"))?,
            cum_fe: f[2].parse().map_err(|_| bad("cum_fe"))?,
            loss: opt_num(f[3], "loss")?,
            train_err: opt_num(f[4], "train_err")?,
            test_err: opt_num(f[5], "test_err")?,
            alpha: num(f[6], "alpha")?,
            evals: f[7].parse().map_err(|_| bad("evals"))?,
            tag: StepTag::parse(f[8]).ok_or_else(|| bad("term"))?,
            batch_loss: num(f[9], "batch_loss")?,
        });
    }
    Ok((run_id, records))
}

/// Function evaluations per iteration over a run, ignoring a trailing divergence marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeStats {
    pub iterations: usize,
    pub min: usize,
    pub max: usize,
    pub mean: f64,
    /// Maximum over iterations after the first.
    pub max_after_first: usize,
}

pub fn fe_stats(records: &[TrainRecord]) -> Option<FeStats> {
    let evals: Vec<usize> = records.iter().filter(|r| r.tag != StepTag::Diverged).map(|r| r.evals).collect();
    if evals.is_empty() {
        return None;
    }
    Some(FeStats {
        iterations: evals.len(),
        min: *evals.iter().min().unwrap(),
        max: *evals.iter().max().unwrap(),
        mean: evals.iter().sum::<usize>() as f64 / evals.len() as f64,
        max_after_first: evals[1..].iter().copied().max().unwrap_or(0),
    })
}
