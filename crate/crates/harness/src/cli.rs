//! Command-line interface.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use genbound::analysis::{empirical_risk, gen_error, mc_true_risk, ols_loglog};
use genbound::bounds::{BoundReport, C2Dims, KappaExponent, Mode};
use genbound::data::{sample_rho, DataSpec};
use genbound::model::frobenius;
use genbound::numfmt::sig17;
use genbound::rng::{derive_seed, label};
use genbound::sgm::{check_norm_recursions, train, DataSource, RecursionCheck};
use genbound::transport::{fit_rate, PointSource};
use serde::Serialize;

use crate::config::{ExperimentConfig, Preset};
use crate::error::{HarnessError, Result};
use crate::experiment::{run_experiment_with_progress, ExperimentReport};
use crate::figures::emit_figures;
use crate::persist::{csv_means, emit_csv, emit_json, read_csv, read_json, to_json, write_json, write_text};

#[derive(Debug, Parser)]
#[command(name = "genbound", version, about = "Generalization bounds for SGM-trained two-layer networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Built-in settings.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Experiment configuration (JSON); overrides --preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training mode: frozen (output layer fixed) or joint.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file or directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one network and report norms, recursion checks and its generalization gap.
    Train {
        #[command(flatten)]
        common: Common,
        /// Training-set size (default: smallest of the configuration).
        #[arg(long)]
        n: Option<usize>,
        /// Repetition index; selects the cell seed.
        #[arg(long, default_value_t = 0)]
        rep: usize,
    },
    /// Evaluate the a-priori bounds without training.
    Bound {
        #[command(flatten)]
        common: Common,
        /// Sample size for the n-dependent bounds.
        #[arg(long)]
        n: Option<usize>,
        /// Confidence level of the deviation bounds.
        #[arg(long)]
        zeta: Option<f64>,
        /// Calibrated Fournier-Guillin constant (see `calibrate-c`).
        #[arg(long)]
        fg_constant: Option<f64>,
        /// Norm of the frozen output layer.
        #[arg(long, default_value_t = 1.0)]
        w_norm: f64,
        /// Use kappa^d in the joint moment bound.
        #[arg(long)]
        literal_kappa_d: bool,
        /// Use d_out instead of d in C2.
        #[arg(long)]
        c2_output_dims: bool,
    },
    /// Run the (n, repetition) grid and write CSV, JSON and SVG artifacts.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Repetitions per training-set size.
        #[arg(long)]
        reps: Option<usize>,
        /// Training-set sizes, comma separated.
        #[arg(long, value_delimiter = ',')]
        ns: Option<Vec<usize>>,
        /// Monte-Carlo draws for the population risk.
        #[arg(long)]
        mc_samples: Option<usize>,
    },
    /// Fit the empirical-measure convergence rate and constant C.
    CalibrateC {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = SourceKind::Cube)]
        source: SourceKind,
        /// Cube dimension.
        #[arg(long, default_value_t = 5)]
        dim: usize,
        #[arg(long, value_delimiter = ',', default_value = "16,32,64,128,256")]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        /// Reference sample size as a multiple of n.
        #[arg(long, default_value_t = 16)]
        reference_factor: usize,
    },
    /// Log-log regression of mean |gen. error| on n from a CSV or JSON report.
    Regress {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render SVG figures from a JSON report.
    Figures {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceKind {
    /// Uniform on the unit cube.
    Cube,
    /// The data distribution of the configuration.
    Rho,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: genbound::Error| e.to_string())
}

impl Common {
    fn resolve(&self, default: Preset) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::preset(self.preset.unwrap_or(default), self.mode.unwrap_or(Mode::Frozen)),
        };
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = Some(o.clone());
        }
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct TrainSummary {
    n: usize,
    rep: usize,
    seed: u64,
    batch_size: usize,
    epochs: usize,
    initial_v_norm: f64,
    initial_w_norm: f64,
    v_norm: f64,
    w_norm: f64,
    true_risk: f64,
    train_risk: f64,
    gen_error: f64,
    recursion_violations: RecursionCheck,
}

#[derive(Serialize)]
struct RegressOutput {
    points: Vec<(f64, f64)>,
    regression: genbound::analysis::RegressionSummary,
}

/// Parses `args` (program name first) and runs; returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Train { common, n, rep } => cmd_train(&common, n, rep),
        Command::Bound { common, n, zeta, fg_constant, w_norm, literal_kappa_d, c2_output_dims } => {
            let cfg = common.resolve(Preset::PaperFull)?;
            let mut inputs = cfg.bound_inputs(match cfg.mode {
                Mode::Frozen => Some(w_norm),
                Mode::Joint => None,
            });
            inputs.n = n;
            inputs.zeta = zeta;
            inputs.fg_constant = fg_constant;
            if literal_kappa_d {
                inputs.kappa_exponent = KappaExponent::HiddenWidth;
            }
            if c2_output_dims {
                inputs.c2_dims = C2Dims::Output;
            }
            let report = BoundReport::evaluate(&inputs)?;
            let text = to_json(&report);
            print!("{text}");
            if let Some(out) = &common.out {
                write_text(out, &text)?;
            }
            Ok(())
        }
        Command::Experiment { common, threads, reps, ns, mc_samples } => {
            let mut cfg = common.resolve(Preset::DeskReduced)?;
            if let Some(r) = reps {
                cfg.repetitions = r;
            }
            if let Some(ns) = ns {
                cfg.ns = ns;
            }
            if let Some(m) = mc_samples {
                cfg.mc_samples = m;
            }
            let report = run_experiment_with_progress(&cfg, threads, true)?;
            let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
            write_experiment(&report, &dir)?;
            print_experiment(&report);
            Ok(())
        }
        Command::CalibrateC { common, source, dim, ns, reps, reference_factor } => {
            let cfg = common.resolve(Preset::PaperFull)?;
            let spec: DataSpec;
            let src = match source {
                SourceKind::Cube => PointSource::UnitCube { dim },
                SourceKind::Rho => {
                    spec = cfg.data_spec()?;
                    PointSource::Rho(&spec)
                }
            };
            let fit = fit_rate(src, &ns, reps, reference_factor, cfg.seed)?;
            print!("{}", to_json(&fit));
            if let Some(out) = &common.out {
                write_json(&fit, &out.join("rate-fit.json"))?;
                let mut csv = String::from("n,rep,distance\n");
                for s in &fit.samples {
                    csv.push_str(&format!("{},{},{}\n", s.n, s.rep, sig17(s.distance)));
                }
                write_text(&out.join("distances.csv"), &csv)?;
            }
            Ok(())
        }
        Command::Regress { input, out } => {
            let points = if input.extension().is_some_and(|e| e == "json") {
                read_json::<ExperimentReport>(&input)?.mean_points()
            } else {
                csv_means(&read_csv(&input)?)
            };
            let regression = ols_loglog(&points)?;
            print!("{}", regression.to_table());
            if let Some(out) = out {
                write_json(&RegressOutput { points, regression }, &out)?;
            }
            Ok(())
        }
        Command::Figures { input, out } => {
            let report: ExperimentReport = read_json(&input)?;
            let dir = out.unwrap_or_else(|| input.parent().map(PathBuf::from).unwrap_or_default());
            for p in emit_figures(&report, &dir)? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn cmd_train(common: &Common, n: Option<usize>, rep: usize) -> Result<()> {
    let cfg = common.resolve(Preset::DeskReduced)?;
    cfg.validate()?;
    let n = n.unwrap_or(cfg.ns[0]);
    if n == 0 {
        return Err(HarnessError::Usage("n must be at least 1".into()));
    }
    let spec = cfg.data_spec()?;
    let seed = cfg.cell_seed(n, rep);
    let set = sample_rho(&spec, n, derive_seed(seed, &[label::DATASET]))?;
    let tc = cfg.train_config(n, cfg.frozen_w()?, seed);
    let traj = train(&tc, DataSource::Dataset(&set), seed)?;
    let p = &traj.final_state;
    let true_risk = mc_true_risk(p, &spec, cfg.activation, cfg.loss, cfg.mc_samples, derive_seed(seed, &[label::MONTE_CARLO]))?;
    let summary = TrainSummary {
        n,
        rep,
        seed,
        batch_size: tc.batch_size,
        epochs: tc.epochs(),
        initial_v_norm: traj.initial.v_norm(),
        initial_w_norm: frobenius(&traj.initial.w.view()),
        v_norm: p.v_norm(),
        w_norm: p.w_norm(),
        true_risk,
        train_risk: empirical_risk(&set, p, cfg.activation, cfg.loss)?,
        gen_error: gen_error(&set, p, cfg.activation, cfg.loss, true_risk)?,
        recursion_violations: check_norm_recursions(&traj, &tc),
    };
    print!("{}", to_json(&summary));
    if let Some(out) = &common.out {
        let mut csv = String::from("t,v_norm,w_norm,batch_loss\n");
        for r in &traj.records {
            let loss = r.batch_loss.map(sig17).unwrap_or_default();
            csv.push_str(&format!("{},{},{},{}\n", r.t, sig17(r.v_norm), sig17(r.w_norm), loss));
        }
        write_text(out, &csv)?;
    }
    Ok(())
}

/// `records.csv`, `report.json` and the two figures.
pub fn write_experiment(report: &ExperimentReport, dir: &std::path::Path) -> Result<()> {
    emit_csv(report, &dir.join("records.csv"))?;
    emit_json(report, &dir.join("report.json"))?;
    if report.per_n.len() >= 2 {
        emit_figures(report, dir)?;
    }
    Ok(())
}

fn print_experiment(report: &ExperimentReport) {
    println!("{:>6} {:>14} {:>14} {:>14}", "n", "mean |gen|", "sd |gen|", report.bound_label);
    for s in &report.per_n {
        println!("{:>6} {:>14.6e} {:>14.6e} {:>14.6e}", s.n, s.mean_abs_gen_error, s.sd_abs_gen_error, s.bound);
    }
    if let Some(r) = &report.regression {
        print!("{}", r.to_table());
    }
    for c in &report.coverage {
        println!(
            "coverage n={} zeta={}: {}/{} = {:.3} (target {:.3})",
            c.n, c.zeta, c.result.successes, c.result.trials, c.result.frequency, c.result.target
        );
    }
    if !report.bound_violations.is_empty() {
        println!("bound violations at n = {:?}", report.bound_violations);
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
}
