use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use gols_core::analyze::{self, ScanLine};
use gols_core::gols::GolsConfig;
use gols_core::oracles;
use gols_core::presets::{self, ArchPreset, DataSource};
use gols_core::probe::{self, LineProbe};
use gols_core::sampler::{BatchSampler, SamplerMode};
use gols_core::train::{self, Optimizer, RunOutcome, TrainRecord};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::manifest::{self, LocalizeManifest, RunSeeds, TrainManifest};
use crate::{GolsFlags, LocalizeArgs, OptKind, SamplerKind, ScanArgs, TrainArgs};

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn create_file(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn apply_gols_flags(cfg: &mut GolsConfig, f: &GolsFlags) {
    if let Some(v) = f.eta {
        cfg.eta = v;
    }
    if let Some(v) = f.c2 {
        cfg.c2 = v;
    }
    if let Some(v) = f.alpha_min {
        cfg.alpha_min = v;
    }
    if let Some(v) = f.alpha_max_cap {
        cfg.alpha_max_cap = v;
    }
    if let Some(v) = f.reuse_prev_gradient {
        cfg.reuse_prev_gradient = v;
    }
}

fn has_gols_flags(f: &GolsFlags) -> bool {
    f.eta.is_some() || f.c2.is_some() || f.alpha_min.is_some() || f.alpha_max_cap.is_some() || f.reuse_prev_gradient.is_some()
}

fn resolve_train(a: &TrainArgs) -> CliResult<TrainManifest> {
    let mut m = match (&a.config, &a.preset) {
        (Some(path), _) => manifest::load::<TrainManifest>(path)?,
        (None, Some(name)) => {
            let p = presets::experiment(name, a.data_dir.as_deref())
                .ok_or_else(|| CliError::Usage(format!("preset: unknown experiment '{name}'")))?;
            TrainManifest::for_preset(&p, PathBuf::from("out"))
        }
        (None, None) => return Err(CliError::Usage("preset: give --preset or --config".into())),
    };
    if let (Some(_), Some(name)) = (&a.config, &a.preset) {
        m.experiment = name.clone();
    }
    if a.data_dir.is_some() {
        m.data_dir = a.data_dir.clone();
    }
    let default_batch = m.preset()?.default_batch.unwrap_or(1);
    let current_batch = m.sampler.batch_size();
    let batch = a.batch.or(current_batch).unwrap_or(default_batch);
    m.sampler = match (a.sampler, a.batch) {
        (Some(SamplerKind::Full), _) => SamplerMode::Full,
        (Some(SamplerKind::Static), _) => SamplerMode::Static { batch_size: batch },
        (Some(SamplerKind::Dynamic), _) => SamplerMode::Dynamic { batch_size: batch },
        (None, Some(b)) => match m.sampler {
            SamplerMode::Static { .. } => SamplerMode::Static { batch_size: b },
            _ => SamplerMode::Dynamic { batch_size: b },
        },
        (None, None) => m.sampler,
    };
    match a.opt {
        Some(OptKind::GolsI) if !matches!(m.optimizer, Optimizer::GolsI(_)) => {
            m.optimizer = Optimizer::GolsI(GolsConfig::default());
        }
        Some(OptKind::Fixed) => {
            let alpha = match (a.alpha, m.optimizer) {
                (Some(v), _) => v,
                (None, Optimizer::FixedStep { alpha }) => alpha,
                (None, _) => return Err(CliError::Usage("alpha: required with --opt fixed".into())),
            };
            m.optimizer = Optimizer::FixedStep { alpha };
        }
        _ => {}
    }
    match &mut m.optimizer {
        Optimizer::GolsI(cfg) => {
            if a.alpha.is_some() {
                return Err(CliError::Usage("alpha: only valid with --opt fixed".into()));
            }
            apply_gols_flags(cfg, &a.gols);
        }
        Optimizer::FixedStep { alpha } => {
            if has_gols_flags(&a.gols) {
                return Err(CliError::Usage("line-search flags need --opt gols-i".into()));
            }
            if let Some(v) = a.alpha {
                *alpha = v;
            }
        }
    }
    if let Some(v) = a.budget {
        m.budget = v;
    }
    if let Some(v) = a.repeats {
        m.repeats = v;
    }
    if let Some(v) = a.seed {
        m.base_seed = v;
    }
    if let Some(v) = a.cadence {
        m.metric_cadence = v;
    }
    if a.error_subsample.is_some() {
        m.error_subsample = a.error_subsample;
    }
    if let Some(out) = &a.out {
        m.output_dir = out.clone();
    }
    m.validate()?;
    Ok(m)
}

pub fn train(a: TrainArgs) -> CliResult<()> {
    let m = resolve_train(&a)?;
    let preset = m.preset()?;
    let configs = m.run_configs()?;
    let (train_set, test_set) = preset.data.load(preset.data.output_dim())?;
    if let Some(b) = m.sampler.batch_size() {
        if b > train_set.len() {
            return Err(CliError::Usage(format!("batch: {b} exceeds the {} training rows", train_set.len())));
        }
    }
    let dir = &m.output_dir;
    create_dir(dir)?;
    manifest::write_manifest(dir, &m)?;
    if let Some(c) = &a.config {
        manifest::copy_config(dir, c)?;
    }
    let seeds: Vec<RunSeeds> = configs
        .iter()
        .map(|c| RunSeeds { run_id: c.run_id.clone(), init_seed: c.init_seed, sampler_seed: c.sampler_seed })
        .collect();
    manifest::write_json(&dir.join("runs.json"), &seeds)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("jobs: {e}")))?;
    let outcomes: Vec<CliResult<RunOutcome>> = pool.install(|| {
        configs
            .par_iter()
            .map(|cfg| {
                let out = train::run(cfg, &train_set, &test_set)?;
                let path = dir.join(format!("{}.csv", cfg.run_id));
                let mut w = create_file(&path)?;
                train::write_records_csv(&mut w, &cfg.run_id, &out.records)
                    .and_then(|_| w.flush())
                    .map_err(|e| CliError::io(&path, e))?;
                Ok(out)
            })
            .collect()
    });
    for (cfg, out) in configs.iter().zip(outcomes) {
        let out = out?;
        let last = out.records.last();
        println!(
            "{}\titerations={}\tcum_fe={}\tfinal_loss={}\t{}",
            cfg.run_id,
            out.records.len(),
            last.map_or(0, |r| r.cum_fe),
            out.final_loss().map_or("-".into(), |l| format!("{l:e}")),
            if out.diverged { "diverged" } else { "ok" }
        );
    }
    Ok(())
}

fn resolve_localize(a: &LocalizeArgs) -> CliResult<LocalizeManifest> {
    let mut m = match &a.config {
        Some(path) => manifest::load::<LocalizeManifest>(path)?,
        None => LocalizeManifest::for_preset(&a.preset, PathBuf::from("out")),
    };
    if a.data_dir.is_some() {
        m.data_dir = a.data_dir.clone();
    }
    let s = &mut m.scan;
    if let Some(v) = a.grid {
        s.grid_points = v;
    }
    if let Some(v) = a.spacing {
        s.spacing = v;
    }
    if let Some(v) = a.repeats {
        s.repeats = v;
    }
    if let Some(v) = &a.batch_sizes {
        s.batch_sizes = v.clone();
    }
    if let Some(v) = a.warmup {
        s.warmup_iterations = v;
    }
    if let Some(v) = a.init_seed {
        s.init_seed = v;
    }
    if let Some(v) = a.seed {
        s.scan_seed = v;
    }
    if let Some(v) = a.window {
        s.window_cells = v;
    }
    if let Some(out) = &a.out {
        m.output_dir = out.clone();
    }
    m.preset()?;
    Ok(m)
}

pub fn localize(a: LocalizeArgs) -> CliResult<()> {
    let m = resolve_localize(&a)?;
    let preset = m.preset()?;
    let arch = preset.architecture();
    let (data, _) = preset.data.load(arch.output_dim())?;
    m.scan.validate(data.len()).map_err(|e| CliError::Usage(e.to_string()))?;
    let study = analyze::localization_study(&arch, &data, &m.scan)?;

    let dir = &m.output_dir;
    create_dir(dir)?;
    manifest::write_manifest(dir, &m)?;
    if let Some(c) = &a.config {
        manifest::copy_config(dir, c)?;
    }
    for h in &study.histograms {
        let path = dir.join(format!("histogram_b{}.csv", h.batch_size));
        let mut w = create_file(&path)?;
        analyze::write_histogram_csv(&mut w, h, &study.grid)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(&path, e))?;
    }
    let summaries = study.summaries();
    let path = dir.join("summary.csv");
    let mut w = create_file(&path)?;
    analyze::write_summary_csv(&mut w, &summaries).and_then(|_| w.flush()).map_err(|e| CliError::io(&path, e))?;
    analyze::write_summary_csv(io::stdout().lock(), &summaries).map_err(|e| CliError::io("stdout", e))?;
    Ok(())
}

/// Per-run and per-experiment table of function evaluations per iteration.
pub fn report_table(runs: &BTreeMap<String, Vec<TrainRecord>>) -> String {
    let mut s = String::new();
    s += "run_id\titerations\tfe_min\tfe_max\tfe_mean\tfe_first\tfe_max_after_first\tfinal_loss\ttrain_err\ttest_err\tdiverged\n";
    let mut groups: BTreeMap<&str, Vec<&[TrainRecord]>> = BTreeMap::new();
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6e}"));
    for (id, recs) in runs {
        let stats = train::fe_stats(recs);
        let last_metrics = recs.iter().rev().find(|r| r.loss.is_some());
        let diverged = recs.last().is_some_and(|r| r.tag == train::StepTag::Diverged);
        match stats {
            Some(st) => {
                s += &format!(
                    "{id}\t{}\t{}\t{}\t{:.4}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                    st.iterations,
                    st.min,
                    st.max,
                    st.mean,
                    recs[0].evals,
                    st.max_after_first,
                    fmt(last_metrics.and_then(|r| r.loss)),
                    fmt(last_metrics.and_then(|r| r.train_err)),
                    fmt(last_metrics.and_then(|r| r.test_err)),
                    diverged
                )
            }
            None => s += &format!("{id}\t0\t-\t-\t-\t-\t-\t-\t-\t-\t{diverged}\n"),
        }
        let experiment = id.rsplit_once("-r").map_or(id.as_str(), |(e, _)| e);
        groups.entry(experiment).or_default().push(recs);
    }
    s += "\nexperiment\truns\tfe_min\tfe_max\tfe_mean\tmean_final_loss\n";
    for (exp, runs) in groups {
        let all: Vec<TrainRecord> = runs.iter().flat_map(|r| r.iter().cloned()).collect();
        let finals: Vec<f64> =
            runs.iter().filter_map(|r| r.iter().rev().find_map(|x| x.loss)).collect();
        let mean_final = (!finals.is_empty()).then(|| finals.iter().sum::<f64>() / finals.len() as f64);
        match train::fe_stats(&all) {
            Some(st) => {
                s += &format!("{exp}\t{}\t{}\t{}\t{:.4}\t{}\n", runs.len(), st.min, st.max, st.mean, fmt(mean_final))
            }
            None => s += &format!("{exp}\t{}\t-\t-\t-\t-\n", runs.len()),
        }
    }
    s
}

pub fn report(dir: &Path) -> CliResult<()> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    let mut runs = BTreeMap::new();
    for p in paths {
        let text = fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?;
        if text.lines().next().map(str::trim) != Some(train::CSV_HEADER) {
            continue;
        }
        let (id, recs) = train::parse_records_csv(&text)?;
        let id = if id.is_empty() { p.file_stem().unwrap().to_string_lossy().into_owned() } else { id };
        runs.insert(id, recs);
    }
    if runs.is_empty() {
        return Err(gols_core::Error::Format(format!("no run CSVs in {}", dir.display())).into());
    }
    print!("{}", report_table(&runs));
    Ok(())
}

pub fn scan(a: ScanArgs) -> CliResult<()> {
    let preset = presets::experiment(&a.preset, a.data_dir.as_deref())
        .ok_or_else(|| CliError::Usage(format!("preset: unknown experiment '{}'", a.preset)))?;
    let arch = preset.architecture();
    let (data, _) = preset.data.load(arch.output_dim())?;
    let mut spec = if a.preset == "iris" { presets::iris_scan_spec() } else { analyze::ScanSpec::default() };
    spec.grid_points = a.grid;
    spec.spacing = a.spacing;
    if let Some(s) = a.init_seed {
        spec.init_seed = s;
    }
    if a.grid < 2 || a.spacing.is_nan() || a.spacing <= 0.0 {
        return Err(CliError::Usage("grid: need at least 2 points and a positive spacing".into()));
    }
    let line = ScanLine::prepare(&arch, &data, &spec)?;
    let mode = match a.sampler {
        SamplerKind::Full => SamplerMode::Full,
        SamplerKind::Static => SamplerMode::Static { batch_size: a.batch },
        SamplerKind::Dynamic => SamplerMode::Dynamic { batch_size: a.batch },
    };
    let mut sampler = BatchSampler::new(mode, data.len(), a.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let points = LineProbe::new(&arch, &data, &mut sampler, &line.origin, &line.direction)?.scan(&spec.grid())?;
    match &a.out {
        Some(path) => {
            let mut w = create_file(path)?;
            probe::write_scan_csv(&mut w, &points).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
        }
        None => probe::write_scan_csv(io::stdout().lock(), &points).map_err(|e| CliError::io("stdout", e)),
    }
}

/// Widths used by `verify` for each architecture family.
fn verify_dims(p: ArchPreset) -> (usize, usize) {
    match p {
        ArchPreset::NetI | ArchPreset::NetII => (784, 10),
        ArchPreset::IrisNet => (4, 3),
        _ => (DataSource::Bcwd { path: None, split: presets::bcwd_split() }.input_dim(), 2),
    }
}

pub fn verify() -> CliResult<()> {
    let mut ok = true;
    for p in ArchPreset::ALL {
        let (input, output) = verify_dims(p);
        let arch = p.build(input, output);
        let data = oracles::synthetic_dataset(6, input, output, 7);
        let x = arch.init_params(11);
        let n = arch.param_count();
        let coords: Vec<usize> = (0..n.min(64)).map(|i| i * n / n.min(64)).collect();
        let err = oracles::gradient_check(&arch, &x.0, &data, &[0, 2, 2, 5], Some(&coords))?;
        let pass = err < 1e-6;
        ok &= pass;
        println!("gradient {:<13} p={n:<8} max_rel_err={err:.3e} {}", p.name(), if pass { "ok" } else { "FAIL" });
    }
    let iris = gols_core::data::load_iris();
    let arch = ArchPreset::IrisNet.build(4, 3);
    let x = arch.init_params(3);
    let (loss, grad) = oracles::exhaustive_expectation(&arch, &x.0, &iris)?;
    let full = arch.evaluate(&x.0, &iris, &(0..iris.len()).collect::<Vec<_>>())?;
    let err = grad.iter().zip(&full.gradient).map(|(a, b)| (a - b).abs()).fold((loss - full.loss).abs(), f64::max);
    let pass = err < 1e-12;
    ok &= pass;
    println!("expectation   iris          max_abs_err={err:.3e} {}", if pass { "ok" } else { "FAIL" });
    if ok {
        Ok(())
    } else {
        Err(gols_core::Error::NonFiniteSlope { alpha: f64::NAN }.into())
    }
}
