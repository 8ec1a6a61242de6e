use gols_core::gols::GolsConfig;
use gols_core::presets;
use gols_core::sampler::SamplerMode;
use gols_core::train::{self, Optimizer, RunConfig, StepTag};

fn config(sampler: SamplerMode, reuse: bool) -> RunConfig {
    let p = presets::experiment("bcwd-netpi", None).unwrap();
    RunConfig {
        run_id: "t".into(),
        arch: p.architecture(),
        sampler,
        optimizer: Optimizer::GolsI(GolsConfig { reuse_prev_gradient: reuse, ..GolsConfig::default() }),
        max_func_evals: 600,
        metric_cadence: 50,
        init_seed: 4,
        sampler_seed: 5,
        error_subsample: Some(100),
    }
}

#[test]
fn every_sampler_mode_respects_the_budget_and_charges_each_iteration() {
    let (train_set, test_set) = presets::experiment("bcwd-netpi", None).unwrap().data.load(2).unwrap();
    for mode in [SamplerMode::Full, SamplerMode::Static { batch_size: 50 }, SamplerMode::Dynamic { batch_size: 50 }] {
        for reuse in [true, false] {
            let cfg = config(mode, reuse);
            let out = train::run(&cfg, &train_set, &test_set).unwrap();
            assert!(!out.diverged);
            let mut prev = 0;
            for (i, r) in out.records.iter().enumerate() {
                // One direction-defining gradient plus the line search.
                assert_eq!(r.cum_fe, prev + 1 + r.evals, "{mode} reuse={reuse} iteration {i}");
                assert!(matches!(r.tag, StepTag::Gols(_)));
                assert!(r.evals >= if reuse && i > 0 { 1 } else { 2 });
                prev = r.cum_fe;
            }
            let last = out.records.last().unwrap();
            assert!(last.cum_fe >= cfg.max_func_evals);
            assert!(out.records[out.records.len() - 2].cum_fe < cfg.max_func_evals);
            assert!(last.loss.is_some() && last.test_err.is_some());
        }
    }
}
