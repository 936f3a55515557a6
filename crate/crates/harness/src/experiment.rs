//! Grid of (sample size, repetition) runs: sample, train, measure, aggregate.

use std::time::Instant;

use genbound::analysis::{coverage_test, gen_error, mc_true_risk, empirical_risk, ols_loglog, CoverageResult, RegressionSummary};
use genbound::bounds::{deviation_bound, gen_bound_independent, BoundReport, Mode};
use genbound::data::sample_rho;
use genbound::model::frobenius;
use genbound::rng::{derive_seed, label};
use genbound::sgm::{train, DataSource};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

/// One trained network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub gen_error: f64,
    pub abs_gen_error: f64,
    pub true_risk: f64,
    pub train_risk: f64,
    pub v_norm: f64,
    pub w_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    pub mean_abs_gen_error: f64,
    pub sd_abs_gen_error: f64,
    /// Expected-error bound at this `n` (`prop4.1a` or `prop4.1b`).
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageEntry {
    pub n: usize,
    pub zeta: f64,
    pub result: CoverageResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub bound_label: String,
    pub constants: BoundReport,
    pub records: Vec<RunRecord>,
    pub per_n: Vec<SizeSummary>,
    pub regression: Option<RegressionSummary>,
    pub coverage: Vec<CoverageEntry>,
    /// Sample sizes whose mean `|ε_gen|` exceeds the bound.
    pub bound_violations: Vec<usize>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn mean_points(&self) -> Vec<(f64, f64)> {
        self.per_n.iter().map(|s| (s.n as f64, s.mean_abs_gen_error)).collect()
    }
}

/// Mean and sample standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Runs the grid on `threads` workers (0 = all cores). Results are assembled
/// in `(n, rep)` order, so the report does not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentReport> {
    run_experiment_with_progress(cfg, threads, false)
}

/// As [`run_experiment`], printing one progress line per finished run to stderr.
pub fn run_experiment_with_progress(cfg: &ExperimentConfig, threads: usize, progress: bool) -> Result<ExperimentReport> {
    cfg.validate()?;
    let spec = cfg.data_spec()?;
    let fixed_w = cfg.frozen_w()?;
    let w_norm = fixed_w.as_ref().map(|w| frobenius(&w.view()));

    let cells: Vec<(usize, usize)> = cfg.ns.iter().flat_map(|&n| (0..cfg.repetitions).map(move |r| (n, r))).collect();
    let total = cells.len();
    let started = Instant::now();
    let done = std::sync::atomic::AtomicUsize::new(0);

    let run_cell = |&(n, rep): &(usize, usize)| -> Result<RunRecord> {
        let seed = cfg.cell_seed(n, rep);
        let wrap = |source| HarnessError::Cell { n, rep, source };
        let train_set = sample_rho(&spec, n, derive_seed(seed, &[label::DATASET])).map_err(wrap)?;
        let tc = cfg.train_config(n, fixed_w.clone(), seed);
        let traj = train(&tc, DataSource::Dataset(&train_set), seed).map_err(wrap)?;
        let p = &traj.final_state;
        let true_risk = mc_true_risk(p, &spec, cfg.activation, cfg.loss, cfg.mc_samples, derive_seed(seed, &[label::MONTE_CARLO]))
            .map_err(wrap)?;
        let train_risk = empirical_risk(&train_set, p, cfg.activation, cfg.loss).map_err(wrap)?;
        let g = gen_error(&train_set, p, cfg.activation, cfg.loss, true_risk).map_err(wrap)?;
        let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
        if progress {
            eprintln!("[{k}/{total}] n={n} rep={rep} |gen|={:.4e} ({:.1}s)", g.abs(), started.elapsed().as_secs_f64());
        }
        Ok(RunRecord {
            n,
            rep,
            seed,
            gen_error: g,
            abs_gen_error: g.abs(),
            true_risk,
            train_risk,
            v_norm: p.v_norm(),
            w_norm: p.w_norm(),
        })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Usage(format!("cannot start worker pool: {e}")))?;
    let records: Vec<RunRecord> = pool.install(|| cells.par_iter().map(run_cell).collect::<Result<Vec<_>>>())?;
    summarize(cfg, records, w_norm)
}

/// Aggregates records into per-`n` means, bounds, regression and coverage.
pub fn summarize(cfg: &ExperimentConfig, records: Vec<RunRecord>, w_norm: Option<f64>) -> Result<ExperimentReport> {
    let inputs = cfg.bound_inputs(w_norm);
    let constants = BoundReport::evaluate(&inputs)?;
    let mut warnings = constants.warnings.clone();
    let bound_label = match cfg.mode {
        Mode::Frozen => "prop4.1a",
        Mode::Joint => "prop4.1b",
    }
    .to_string();

    let mut per_n = Vec::new();
    let mut coverage = Vec::new();
    for &n in &cfg.ns {
        let abs: Vec<f64> = records.iter().filter(|r| r.n == n).map(|r| r.abs_gen_error).collect();
        if abs.is_empty() {
            continue;
        }
        let (mean, sd) = mean_sd(&abs);
        per_n.push(SizeSummary { n, mean_abs_gen_error: mean, sd_abs_gen_error: sd, bound: gen_bound_independent(n, &inputs)? });
        for &zeta in &cfg.zetas {
            let radius = deviation_bound(n, zeta, &inputs)?;
            coverage.push(CoverageEntry { n, zeta, result: coverage_test(&abs, radius, zeta)? });
        }
    }
    let bound_violations = per_n.iter().filter(|s| s.mean_abs_gen_error > s.bound).map(|s| s.n).collect();
    let regression = if per_n.len() >= 3 {
        let points: Vec<(f64, f64)> = per_n.iter().map(|s| (s.n as f64, s.mean_abs_gen_error)).collect();
        match ols_loglog(&points) {
            Ok(r) => Some(r),
            Err(e) => {
                warnings.push(format!("regression skipped: {e}"));
                None
            }
        }
    } else {
        warnings.push("regression needs at least three sample sizes".into());
        None
    };
    Ok(ExperimentReport {
        config: cfg.clone(),
        bound_label,
        constants,
        records,
        per_n,
        regression,
        coverage,
        bound_violations,
        warnings,
    })
}
