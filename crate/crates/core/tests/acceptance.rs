//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p gols-core --test acceptance`. Positional
//! arguments select criteria by id (`-- C4 C5`). The process exits non-zero
//! on any failure outside `KNOWN_FAILURES`; set `GOLS_ACCEPTANCE_STRICT=1`
//! to count those as well.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use gols_core::analyze::{self, LocalizationStudy};
use gols_core::data::{self, Dataset};
use gols_core::gols::{self, GolsConfig, SlopeFn, Termination};
use gols_core::oracles;
use gols_core::presets::{self, ArchPreset};
use gols_core::rng::{self, derive_seed};
use gols_core::sampler::SamplerMode;
use gols_core::train::{self, Optimizer, RunConfig, RunOutcome};
use rand::Rng;

/// Criteria that fail with a faithful implementation; see the README.
const KNOWN_FAILURES: &[&str] = &["C7"];

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

fn bcwd() -> (Dataset, Dataset) {
    presets::experiment("bcwd-logr", None).unwrap().data.load(2).unwrap()
}

fn run_config(experiment: &str, r: u64, sampler: SamplerMode, optimizer: Optimizer, budget: usize, cadence: usize) -> RunConfig {
    let p = presets::experiment(experiment, None).unwrap();
    RunConfig {
        run_id: format!("{experiment}-r{r:02}"),
        arch: p.architecture(),
        sampler,
        optimizer,
        max_func_evals: budget,
        metric_cadence: cadence,
        init_seed: derive_seed(0, 0, r),
        sampler_seed: derive_seed(0, 1, r),
        error_subsample: None,
    }
}

fn csv_bytes(cfg: &RunConfig, out: &RunOutcome) -> Vec<u8> {
    let mut v = Vec::new();
    train::write_records_csv(&mut v, &cfg.run_id, &out.records).unwrap();
    v
}

fn gols_i() -> Optimizer {
    Optimizer::GolsI(GolsConfig::default())
}

// C1

fn gradient_exactness() -> Verdict {
    let (train_set, _) = bcwd();
    let mnist_like = oracles::synthetic_dataset(8, 784, 10, 3);
    let mut worst = BTreeMap::new();
    for preset in [ArchPreset::LogR, ArchPreset::NetPI, ArchPreset::NetPII, ArchPreset::NetI, ArchPreset::NetII] {
        let (arch, d) = match preset {
            ArchPreset::NetI | ArchPreset::NetII => (preset.build(784, 10), &mnist_like),
            _ => (preset.build(train_set.input_dim(), 2), &train_set),
        };
        let p = arch.param_count();
        for seed in 0..3u64 {
            let x = arch.init_params(derive_seed(100, 0, seed));
            let mut r = rng::seeded(derive_seed(100, 1, seed));
            let batch: Vec<usize> = (0..d.len().min(50)).map(|_| rng::uniform_index(&mut r, d.len())).collect();
            // Every coordinate on the small nets; a seeded subset on the MNIST-sized ones.
            let coords: Option<Vec<usize>> =
                (p > 20_000).then(|| (0..200).map(|_| rng::uniform_index(&mut r, p)).collect());
            let err = oracles::gradient_check(&arch, &x.0, d, &batch, coords.as_deref()).unwrap();
            let e = worst.entry(preset.name()).or_insert(0.0f64);
            *e = e.max(err);
        }
    }
    let max = worst.values().copied().fold(0.0, f64::max);
    let detail = worst.iter().map(|(k, v)| format!("{k}={v:.1e}")).collect::<Vec<_>>().join(" ");
    Verdict::new(max < 1e-6, detail)
}

// C2

fn expectation_identity() -> Verdict {
    let iris = data::load_iris();
    let arch = ArchPreset::IrisNet.build(4, 3);
    let all: Vec<usize> = (0..iris.len()).collect();
    let mut worst = 0.0f64;
    for seed in 0..3 {
        let x = arch.init_params(seed);
        let (loss, grad) = oracles::exhaustive_expectation(&arch, &x.0, &iris).unwrap();
        let full = arch.evaluate(&x.0, &iris, &all).unwrap();
        worst = worst.max((loss - full.loss).abs());
        for (a, b) in grad.iter().zip(&full.gradient) {
            worst = worst.max((a - b).abs());
        }
    }
    Verdict::new(worst <= 1e-12, format!("max |diff| = {worst:.2e}"))
}

// C3

#[derive(Clone, Copy, Debug)]
enum Oracle {
    /// Monotone slope with a single root at `root`.
    Root { root: f64, scale: f64, curved: bool },
    Ascent { scale: f64 },
    Descent { scale: f64 },
}

impl Oracle {
    fn slope(&self, a: f64) -> f64 {
        match *self {
            Oracle::Root { root, scale, curved: false } => scale * (a - root),
            Oracle::Root { root, scale, curved: true } => scale * ((a / root).ln() * 3.0).tanh(),
            Oracle::Ascent { scale } => scale * (1.0 + a),
            Oracle::Descent { scale } => -scale * (1.0 + a.sqrt()),
        }
    }
}

fn log_uniform<R: Rng>(r: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + r.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn gols_contract() -> Verdict {
    let cfg = GolsConfig::default();
    let mut r = rng::seeded(2024);
    let (mut bounds, mut bracket, mut clamps) = (0usize, 0usize, 0usize);
    let mut roots_checked = 0usize;
    for i in 0..1000 {
        let norm = log_uniform(&mut r, 1e-9, 1e4);
        let alpha_max = gols::alpha_max_from_norm(norm, &cfg);
        let scale = log_uniform(&mut r, 1e-3, 1e3);
        let oracle = match i % 4 {
            0 | 1 => Oracle::Root { root: log_uniform(&mut r, 1e-8, alpha_max), scale, curved: i % 4 == 1 },
            2 => Oracle::Ascent { scale },
            _ => Oracle::Descent { scale },
        };
        let guess = log_uniform(&mut r, 1e-8, 1e7);
        let reuse = (r.random::<f64>() < 0.5).then(|| oracle.slope(0.0));
        let mut probe = SlopeFn::new(|a| oracle.slope(a), norm);
        let out = gols::search(&mut probe, guess, &cfg, reuse).unwrap();
        let a = out.alpha_accepted;
        if !(a >= cfg.alpha_min && a <= alpha_max.max(cfg.alpha_min)) {
            bounds += 1;
        }
        match oracle {
            Oracle::Root { .. } => {
                // Brute-force root on a log-spaced grid of the admissible range.
                let (lo, hi) = (cfg.alpha_min.ln(), alpha_max.ln());
                let brute = oracles::brute_sign_change(|t| oracle.slope(t.exp()), lo, hi, 200_000).unwrap();
                if let Some(t) = brute {
                    roots_checked += 1;
                    let root = t.exp();
                    let ratio = (a / root).max(root / a);
                    // Slack of one brute-force grid cell.
                    if ratio > cfg.eta * (1.0 + 1e-3) {
                        bracket += 1;
                    }
                }
            }
            Oracle::Ascent { .. } if out.termination != Termination::MinAlphaClamp => clamps += 1,
            Oracle::Descent { .. } if out.termination != Termination::MaxAlphaClamp => clamps += 1,
            _ => {}
        }
    }
    Verdict::new(
        bounds + bracket + clamps == 0,
        format!(
            "bound violations {bounds}, bracket misses {bracket}/{roots_checked}, wrong clamp terminations {clamps}"
        ),
    )
}

// C4

fn cold_start_growth() -> Verdict {
    let cfg = GolsConfig::default();
    let fprime = |a: f64| 2.0 * (a - 1.0);
    let norm = 1e-3;
    let alpha_max = gols::alpha_max_from_norm(norm, &cfg);
    let (oracle_alpha, k) = oracles::doubling_walk(fprime, cfg.alpha_min, cfg.eta, alpha_max);
    let mut probe = SlopeFn::new(fprime, norm);
    let fresh = gols::search(&mut probe, cfg.alpha_min, &cfg, None).unwrap();
    let mut probe = SlopeFn::new(fprime, norm);
    let reused = gols::search(&mut probe, cfg.alpha_min, &cfg, Some(fprime(0.0))).unwrap();
    let pass = fresh.evals == k + 2
        && reused.evals == k + 1
        && fresh.alpha_accepted == oracle_alpha
        && fresh.termination == Termination::SignChangeUp;
    Verdict::new(
        pass,
        format!(
            "doublings {k}; evals {} with F'(0) evaluated (oracle {}), {} with F'(0) reused (oracle {}); alpha {:.4}",
            fresh.evals,
            k + 2,
            reused.evals,
            k + 1,
            fresh.alpha_accepted
        ),
    )
}

// C5

fn iris_study() -> LocalizationStudy {
    let p = presets::experiment("iris", None).unwrap();
    let (iris, _) = p.data.load(3).unwrap();
    let mut spec = presets::iris_scan_spec();
    spec.grid_points = 100;
    spec.spacing = 0.002;
    spec.repeats = 100;
    analyze::localization_study(&p.architecture(), &iris, &spec).unwrap()
}

fn study_csv(study: &LocalizationStudy) -> Vec<u8> {
    let mut v = Vec::new();
    for h in &study.histograms {
        analyze::write_histogram_csv(&mut v, h, &study.grid).unwrap();
    }
    analyze::write_summary_csv(&mut v, &study.summaries()).unwrap();
    v
}

fn localization(study: &LocalizationStudy, elapsed: Duration) -> Verdict {
    let (minima, snn) = (&study.full_batch_minima, &study.full_batch_snngpp);
    let a = snn.len() == 1 && minima.len() == 1 && snn[0].abs_diff(minima[0]) <= 1;
    let summaries = study.summaries();
    let get = |b: usize| summaries.iter().find(|s| s.batch_size == b).unwrap();
    let b = get(10).std_ratio < 0.5;
    let (s100, s50, s10) = (get(100).snngpp_std, get(50).snngpp_std, get(10).snngpp_std);
    let c = s100 <= s50 && s50 <= s10;
    Verdict::new(
        a && b && c && within(elapsed, 300),
        format!(
            "(a) full-batch minima {minima:?} SNN-GPP {snn:?}; (b) |B|=10 std ratio {:.3}; (c) SNN-GPP std {s100:.4} <= {s50:.4} <= {s10:.4}",
            get(10).std_ratio
        ),
    )
}

// C6, C8

struct BcwdRuns {
    gols: Vec<(RunConfig, RunOutcome)>,
    fixed: Vec<(RunConfig, RunOutcome)>,
}

fn bcwd_pair(train_set: &Dataset, test_set: &Dataset, r: u64) -> ((RunConfig, RunOutcome), (RunConfig, RunOutcome)) {
    let sampler = SamplerMode::Dynamic { batch_size: 100 };
    let g = run_config("bcwd-logr", r, sampler, gols_i(), 100_000, 1000);
    let f = run_config("bcwd-logr", r, sampler, Optimizer::FixedStep { alpha: 1.0 }, 100_000, 1000);
    let go = train::run(&g, train_set, test_set).unwrap();
    let fo = train::run(&f, train_set, test_set).unwrap();
    ((g, go), (f, fo))
}

fn bcwd_runs() -> BcwdRuns {
    let (train_set, test_set) = bcwd();
    let (gols, fixed) = (0..10).map(|r| bcwd_pair(&train_set, &test_set, r)).unzip();
    BcwdRuns { gols, fixed }
}

fn bcwd_logistic(runs: &BcwdRuns, elapsed: Duration) -> Verdict {
    let finals: Vec<(f64, f64)> = runs
        .gols
        .iter()
        .zip(&runs.fixed)
        .map(|((_, g), (_, f))| (g.final_loss().unwrap_or(f64::INFINITY), f.final_loss().unwrap_or(f64::INFINITY)))
        .collect();
    let reached = finals.iter().filter(|(g, _)| *g < 1e-6).count();
    let better = finals.iter().filter(|(g, f)| g < f).count();
    let worst = finals.iter().map(|p| p.0).fold(0.0, f64::max);
    Verdict::new(
        reached >= 8 && better >= 8 && within(elapsed, 900),
        format!("loss < 1e-6 in {reached}/10 (worst {worst:.2e}); below fixed alpha=1 in {better}/10"),
    )
}

fn step_adaptivity(runs: &BcwdRuns) -> Verdict {
    let spreads: Vec<f64> = runs
        .gols
        .iter()
        .map(|(_, o)| {
            let first = o.records[0].alpha;
            let max = o.records.iter().map(|r| r.alpha).fold(0.0, f64::max);
            (max / first).log10()
        })
        .collect();
    let min = spreads.iter().copied().fold(f64::INFINITY, f64::min);
    let max = spreads.iter().copied().fold(0.0, f64::max);
    Verdict::new(min >= 6.0, format!("orders of magnitude between first and largest step: {min:.2} to {max:.2}"))
}

// C7

fn full_batch_run(r: u64) -> (RunConfig, RunOutcome) {
    let (train_set, test_set) = bcwd();
    let cfg = run_config("bcwd-logr", r, SamplerMode::Full, gols_i(), 3000, 1);
    let out = train::run(&cfg, &train_set, &test_set).unwrap();
    (cfg, out)
}

fn full_batch_descent(elapsed_budget: Instant) -> Verdict {
    let (train_set, _) = bcwd();
    let all: Vec<usize> = (0..train_set.len()).collect();
    let mut violations = Vec::new();
    let mut iterations = 0;
    for r in 0..3 {
        let (cfg, out) = full_batch_run(r);
        let mut prev = cfg.arch.loss(&cfg.arch.init_params(cfg.init_seed).0, &train_set, &all).unwrap();
        for rec in &out.records {
            let loss = rec.loss.expect("metrics every iteration");
            if loss > prev {
                violations.push((r, rec.iteration, (loss - prev) / prev, rec.tag));
            }
            prev = loss;
            iterations += 1;
        }
    }
    let worst = violations.iter().map(|v| v.2).fold(0.0, f64::max);
    let tags: std::collections::BTreeSet<String> = violations.iter().map(|v| v.3.to_string()).collect();
    Verdict::new(
        violations.is_empty() && within(elapsed_budget.elapsed(), 120),
        format!(
            "{} increases over {iterations} iterations (3 seeds), largest relative increase {worst:.1e}, tags {tags:?}",
            violations.len()
        ),
    )
}

// C10

fn deep_run(r: u64) -> (RunConfig, RunOutcome) {
    let p = presets::experiment("netpi-deep10", None).unwrap();
    let (train_set, test_set) = p.data.load(2).unwrap();
    let cfg = run_config("netpi-deep10", r, SamplerMode::Dynamic { batch_size: 100 }, gols_i(), 3000, 100);
    let out = train::run(&cfg, &train_set, &test_set).unwrap();
    (cfg, out)
}

fn fe_accounting(elapsed_budget: Instant) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in 0..3 {
        let (_, out) = deep_run(r);
        let s = train::fe_stats(&out.records).unwrap();
        ok &= s.min == 1 && (1.0..=4.0).contains(&s.mean);
        parts.push(format!("seed {r}: min {} mean {:.2}", s.min, s.mean));
    }
    Verdict::new(ok && within(elapsed_budget.elapsed(), 300), parts.join("; "))
}

// C9

fn determinism(runs: Option<&BcwdRuns>, study: Option<&LocalizationStudy>) -> Verdict {
    let mut checked = Vec::new();
    let mut same = true;
    let (train_set, test_set) = bcwd();
    let ((g, go), (f, fo)) = bcwd_pair(&train_set, &test_set, 0);
    let mut pairs = vec![(csv_bytes(&g, &go), csv_bytes(&g, &go)), (csv_bytes(&f, &fo), csv_bytes(&f, &fo))];
    if let Some(runs) = runs {
        pairs[0].1 = csv_bytes(&runs.gols[0].0, &runs.gols[0].1);
        pairs[1].1 = csv_bytes(&runs.fixed[0].0, &runs.fixed[0].1);
    } else {
        let ((g2, go2), (f2, fo2)) = bcwd_pair(&train_set, &test_set, 0);
        pairs[0].1 = csv_bytes(&g2, &go2);
        pairs[1].1 = csv_bytes(&f2, &fo2);
    }
    checked.push("bcwd dynamic gols-i");
    checked.push("bcwd dynamic fixed");
    for (a, b) in &pairs {
        same &= a == b;
    }
    let twice = |f: &dyn Fn() -> Vec<u8>| f() == f();
    same &= twice(&|| {
        let (c, o) = full_batch_run(0);
        csv_bytes(&c, &o)
    });
    checked.push("bcwd full-batch");
    same &= twice(&|| {
        let (c, o) = deep_run(0);
        csv_bytes(&c, &o)
    });
    checked.push("netpi-deep10");
    let fresh = study_csv(&iris_study());
    same &= match study {
        Some(s) => study_csv(s) == fresh,
        None => fresh == study_csv(&iris_study()),
    };
    checked.push("iris localization");
    Verdict::new(same, format!("byte-identical reruns: {}", checked.join(", ")))
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let strict = std::env::var("GOLS_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let want = |id: &str| filters.is_empty() || filters.iter().any(|f| f.eq_ignore_ascii_case(id));
    let mut results: Vec<(&str, &str, Verdict, Duration)> = Vec::new();
    let mut record = |id: &'static str, name: &'static str, t: Instant, v: Verdict| {
        let elapsed = t.elapsed();
        let known = KNOWN_FAILURES.contains(&id) && !v.pass;
        println!(
            "{id:<4}{} {name}: {} [{:.1}s]",
            if v.pass { "PASS" } else if known { "FAIL (known)" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64()
        );
        results.push((id, name, v, elapsed));
    };

    if want("C1") {
        let t = Instant::now();
        let v = gradient_exactness();
        let v = Verdict { pass: v.pass && within(t.elapsed(), 60), ..v };
        record("C1", "gradient exactness", t, v);
    }
    if want("C2") {
        let t = Instant::now();
        let v = expectation_identity();
        let v = Verdict { pass: v.pass && within(t.elapsed(), 10), ..v };
        record("C2", "expectation identity", t, v);
    }
    if want("C3") {
        let t = Instant::now();
        let v = gols_contract();
        let v = Verdict { pass: v.pass && within(t.elapsed(), 30), ..v };
        record("C3", "line search contract", t, v);
    }
    if want("C4") {
        let t = Instant::now();
        record("C4", "cold-start growth count", t, cold_start_growth());
    }
    let mut study = None;
    if want("C5") {
        let t = Instant::now();
        let s = iris_study();
        let v = localization(&s, t.elapsed());
        record("C5", "localization study", t, v);
        study = Some(s);
    }
    let mut runs = None;
    if want("C6") || want("C8") {
        let t = Instant::now();
        let r = bcwd_runs();
        let elapsed = t.elapsed();
        if want("C6") {
            record("C6", "BCWD logistic regression", t, bcwd_logistic(&r, elapsed));
        }
        if want("C8") {
            record("C8", "step size adaptivity", Instant::now(), step_adaptivity(&r));
        }
        runs = Some(r);
    }
    if want("C7") {
        let t = Instant::now();
        record("C7", "full-batch descent", t, full_batch_descent(t));
    }
    if want("C9") {
        let t = Instant::now();
        record("C9", "determinism", t, determinism(runs.as_ref(), study.as_ref()));
    }
    if want("C10") {
        let t = Instant::now();
        record("C10", "Fe./It. accounting", t, fe_accounting(t));
    }

    let failed: Vec<&str> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    let blocking: Vec<&str> = failed.iter().copied().filter(|id| strict || !KNOWN_FAILURES.contains(id)).collect();
    println!("{}/{} criteria passed; failed: {:?}", results.len() - failed.len(), results.len(), failed);
    if !blocking.is_empty() {
        std::process::exit(1);
    }
}
