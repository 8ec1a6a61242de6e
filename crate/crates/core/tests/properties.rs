use gols_core::analyze::{detect_minima, detect_snngpp, LocalizationHistogram};
use gols_core::data::{standardize, Dataset};
use gols_core::gols::{self, GolsConfig, SlopeFn, Termination};
use gols_core::model::Architecture;
use gols_core::oracles;
use gols_core::presets::ArchPreset;
use gols_core::rng;
use gols_core::sampler::{BatchSampler, SamplerMode};
use gols_core::train::{self, StepTag, TrainRecord};
use ndarray::Array2;
use proptest::prelude::*;

fn log_range(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

/// Increasing slope with a root at `root`, or a one-signed slope.
#[derive(Debug, Clone, Copy)]
enum Slope {
    Linear { root: f64, scale: f64 },
    Positive(f64),
    Negative(f64),
}

impl Slope {
    fn at(self, a: f64) -> f64 {
        match self {
            Slope::Linear { root, scale } => scale * (a - root),
            Slope::Positive(s) => s * (1.0 + a),
            Slope::Negative(s) => -s / (1.0 + a),
        }
    }
}

fn slopes() -> impl Strategy<Value = Slope> {
    prop_oneof![
        (log_range(1e-9, 1e8), log_range(1e-4, 1e4)).prop_map(|(root, scale)| Slope::Linear { root, scale }),
        log_range(1e-4, 1e4).prop_map(Slope::Positive),
        log_range(1e-4, 1e4).prop_map(Slope::Negative),
    ]
}

fn search(s: Slope, norm: f64, guess: f64, reuse: bool) -> (gols::GolsOutcome, usize) {
    let cfg = GolsConfig::default();
    let mut probe = SlopeFn::new(|a| s.at(a), norm);
    let out = gols::search(&mut probe, guess, &cfg, reuse.then(|| s.at(0.0))).unwrap();
    (out, probe.calls)
}

proptest! {
    #[test]
    fn gols_step_stays_in_range_and_eval_count_is_bounded(
        s in slopes(), norm in log_range(1e-10, 1e5), guess in log_range(1e-10, 1e9), reuse: bool,
    ) {
        let cfg = GolsConfig::default();
        let (out, calls) = search(s, norm, guess, reuse);
        let alpha_max = gols::alpha_max_from_norm(norm, &cfg);
        prop_assert!(out.alpha_accepted >= cfg.alpha_min && out.alpha_accepted <= alpha_max);
        prop_assert_eq!(out.evals, calls);
        let steps = (alpha_max / cfg.alpha_min).log(cfg.eta).ceil() as usize;
        prop_assert!(out.evals <= steps + 2, "{} evals, range allows {}", out.evals, steps + 2);
    }

    #[test]
    fn gols_brackets_the_sign_change(
        root in log_range(1e-7, 1e3), scale in log_range(1e-3, 1e3), guess in log_range(1e-8, 1e6),
    ) {
        let cfg = GolsConfig::default();
        let s = Slope::Linear { root, scale };
        let (out, _) = search(s, 1e-4, guess, true);
        let a = out.alpha_accepted;
        match out.termination {
            Termination::SignChangeUp => prop_assert!(s.at(a / cfg.eta) < 0.0 && s.at(a) >= 0.0),
            Termination::SignChangeDown => prop_assert!(s.at(a) < 0.0 && s.at(a * cfg.eta) >= 0.0),
            Termination::ImmediateAccept => prop_assert!(a > root && a < root * (1.0 + cfg.c2)),
            t => prop_assert!(false, "unexpected {t:?} for interior root"),
        }
    }

    #[test]
    fn gols_growth_count_matches_doubling_oracle(root in log_range(1e-6, 1e3)) {
        let cfg = GolsConfig::default();
        let f = |a: f64| a - root;
        let alpha_max = gols::alpha_max_from_norm(1e-4, &cfg);
        let (alpha, k) = oracles::doubling_walk(f, cfg.alpha_min, cfg.eta, alpha_max);
        let (out, _) = search(Slope::Linear { root, scale: 1.0 }, 1e-4, cfg.alpha_min, false);
        prop_assert_eq!(out.evals, k + 2);
        prop_assert_eq!(out.alpha_accepted, alpha);
    }

    #[test]
    fn standardization_is_idempotent(rows in 2usize..30, cols in 1usize..6, seed: u64) {
        let d = oracles::synthetic_dataset(rows, cols, 2, seed);
        let all: Vec<usize> = (0..rows).collect();
        let (once, _) = standardize(&d, &all).unwrap();
        let (twice, stats) = standardize(&once, &all).unwrap();
        for (a, b) in once.inputs().iter().zip(twice.inputs()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        for (m, s) in stats.mean.iter().zip(&stats.std) {
            prop_assert!(m.abs() < 1e-9);
            prop_assert!(*s == 0.0 || (s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn flatten_inverts_unflatten(widths in prop::collection::vec(1usize..6, 2..5), seed: u64) {
        let arch = ArchPreset::NetPI.build(2, 2);
        let arch = Architecture { layer_widths: widths, ..arch };
        let x = arch.init_params(seed);
        let layers: Vec<_> = arch.unflatten(&x.0).into_iter().map(|(w, b)| (w.to_owned(), b.to_owned())).collect();
        prop_assert_eq!(arch.flatten(&layers).unwrap(), x);
    }

    #[test]
    fn sampled_batches_have_requested_size_and_range(m in 1usize..200, frac in 0.0f64..1.0, seed: u64, dynamic: bool) {
        let b = 1 + ((m - 1) as f64 * frac) as usize;
        let mode = if dynamic { SamplerMode::Dynamic { batch_size: b } } else { SamplerMode::Static { batch_size: b } };
        let mut s = BatchSampler::new(mode, m, seed).unwrap();
        for _ in 0..3 {
            let batch = s.draw();
            prop_assert_eq!(batch.len(), b);
            prop_assert!(batch.iter().all(|&i| i < m));
        }
    }

    #[test]
    fn smooth_convex_scan_has_one_minimum_and_matching_sign_change(centre in 0.05f64..0.95, curv in 0.1f64..100.0) {
        let grid: Vec<f64> = (0..100).map(|i| i as f64 * 0.01 + 0.003).collect();
        let values: Vec<f64> = grid.iter().map(|a| curv * (a - centre).powi(2)).collect();
        let slopes: Vec<f64> = grid.iter().map(|a| 2.0 * curv * (a - centre)).collect();
        let minima = detect_minima(&values);
        let snn = detect_snngpp(&slopes);
        prop_assert_eq!(minima.len(), 1);
        prop_assert_eq!(snn.len(), 1);
        prop_assert!(minima[0].abs_diff(snn[0]) <= 1);
    }

    #[test]
    fn histogram_band_holds_requested_mass(counts in prop::collection::vec(0usize..20, 5..40), mass in 0.5f64..0.99) {
        let grid: Vec<f64> = (0..counts.len()).map(|i| i as f64 * 0.1).collect();
        let total: usize = counts.iter().sum();
        let h = LocalizationHistogram {
            batch_size: 10,
            repeats: 1,
            skipped: 0,
            minima: counts.clone(),
            snngpp: counts.clone(),
        };
        match h.snngpp_band(&grid, mass) {
            None => prop_assert_eq!(total, 0),
            Some((lo, hi)) => {
                prop_assert!(lo <= hi);
                let inside: usize = grid.iter().zip(&counts).filter(|(a, _)| **a >= lo && **a <= hi).map(|(_, c)| c).sum();
                prop_assert!(inside as f64 >= mass * total as f64 - 1e-9);
            }
        }
        let s = h.summarize(&grid, Some(counts.len() / 2), 3);
        if s.minima_std > 0.0 {
            prop_assert!((s.std_ratio - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn run_csv_round_trips(
        rows in prop::collection::vec((0usize..50, any::<bool>(), -1e6f64..1e6, 1e-9f64..1e7, 1usize..40), 1..20),
    ) {
        let mut cum = 0;
        let records: Vec<TrainRecord> = rows
            .iter()
            .enumerate()
            .map(|(n, &(extra, metrics, loss, alpha, evals))| {
                cum += evals + extra;
                TrainRecord {
                    iteration: n,
                    cum_fe: cum,
                    loss: metrics.then_some(loss),
                    train_err: metrics.then_some(0.25),
                    test_err: None,
                    alpha,
                    evals,
                    tag: if n % 2 == 0 { StepTag::Gols(Termination::SignChangeUp) } else { StepTag::Fixed },
                    batch_loss: loss * 0.5,
                }
            })
            .collect();
        let mut buf = Vec::new();
        train::write_records_csv(&mut buf, "p-r00", &records).unwrap();
        let (id, parsed) = train::parse_records_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(id, "p-r00");
        prop_assert_eq!(parsed, records);
    }
}

#[test]
fn derived_seeds_are_distinct_over_a_run_grid() {
    let mut seen = std::collections::HashSet::new();
    for stream in 0..4 {
        for index in 0..500 {
            assert!(seen.insert(rng::derive_seed(7, stream, index)));
        }
    }
}

#[test]
fn expectation_of_singletons_matches_full_batch_on_small_net() {
    let d = oracles::synthetic_dataset(12, 3, 2, 5);
    let arch = ArchPreset::NetPII.build(3, 2);
    let x = arch.init_params(9);
    let (loss, grad) = oracles::exhaustive_expectation(&arch, &x.0, &d).unwrap();
    let full = arch.evaluate(&x.0, &d, &(0..12).collect::<Vec<_>>()).unwrap();
    assert!((loss - full.loss).abs() < 1e-12);
    assert!(grad.iter().zip(&full.gradient).all(|(a, b)| (a - b).abs() < 1e-12));
}

#[test]
fn backprop_matches_finite_differences_on_every_small_preset() {
    for p in [ArchPreset::LogR, ArchPreset::NetPI, ArchPreset::NetPII, ArchPreset::NetPIDeep10, ArchPreset::IrisNet] {
        let d = oracles::synthetic_dataset(5, 4, 3, 1);
        let arch = p.build(4, 3);
        let x = arch.init_params(2);
        let err = oracles::gradient_check(&arch, &x.0, &d, &[0, 1, 1, 4], None).unwrap();
        assert!(err < 1e-6, "{}: {err}", p.name());
    }
}

#[test]
fn dataset_rejects_mismatched_rows() {
    let err = Dataset::new("x", Array2::zeros((3, 2)), Array2::zeros((2, 1)));
    assert!(err.is_err());
}
