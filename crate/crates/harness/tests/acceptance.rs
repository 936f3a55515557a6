//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//!
//! Reference constants below were produced independently of this crate
//! (50-digit mpmath evaluation of the closed forms, adaptive quadrature of
//! the t density) and are frozen here.

use std::process::Command;
use std::time::Instant;

use genbound::analysis::{ols_loglog, t_cdf};
use genbound::bounds::{moment_bound_frozen, Mode};
use genbound::data::{sample_rho, DiscreteMeasure};
use genbound::model::{frobenius, grad_v, grad_w, reg_loss, ActivationKind, LossKind, ParamState};
use genbound::rng::{derive_seed, label, Stream};
use genbound::sgm::{check_norm_recursions, train, DataSource};
use genbound::transport::{fit_rate, w1_exact, PointSource};
use genbound_harness::config::{ExperimentConfig, Preset};
use genbound_harness::experiment::{mean_sd, run_experiment, ExperimentReport};
use ndarray::Array2;

const PI1_REF: f64 = 0.740_707_032_156_099_464_825_492_75;
const C1_REF: f64 = 13.068_108_984_641_806_256_616_950;
const GEN250_REF: f64 = 1.779_490_670_517_873_832_826_785_1;
const REFERENCE_SLOPE: f64 = -0.5139;

const T_POINTS: [f64; 8] = [-4.0, -2.0, -1.0, -0.5, 0.3, 1.0, 2.101, 5.0];
const T_TABLE: [(f64, [f64; 8]); 8] = [
    (1.0, [0.077979130377369325, 0.14758361765043327, 0.25, 0.35241638234956673, 0.59277357907774234, 0.75, 0.85859578636502331, 0.93716704181099882]),
    (2.0, [0.028595479208968317, 0.091751709536136984, 0.21132486540518712, 0.33333333333333333, 0.60375716957991119, 0.78867513459481288, 0.91478665389625216, 0.98112522432468814]),
    (3.0, [0.014004228005073083, 0.069662984279421588, 0.19550110947788532, 0.3257239824240755, 0.60811835398004048, 0.80449889052211468, 0.93677761022715399, 0.99230378096334885]),
    (5.0, [0.0051617077404157269, 0.050969739414929178, 0.18160873382456131, 0.3191494358204645, 0.61187547886836277, 0.81839126617543869, 0.95518028449209481, 0.99794764200997334]),
    (10.0, [0.0012591663123683461, 0.036694017385370183, 0.17044656615102994, 0.31394680287148647, 0.61483969621710069, 0.82955343384897006, 0.96901350584581684, 0.99973133319862177]),
    (18.0, [0.00041991465870428047, 0.030410732834666263, 0.16528246563909213, 0.31156622864829317, 0.6161929393532609, 0.83471753436090787, 0.97500381856101825, 0.99995357928721312]),
    (30.0, [0.00019092281804187842, 0.027312522481491552, 0.16265430771301495, 0.31036150244256364, 0.61687694735782359, 0.83734569228698505, 0.97792593240927748, 0.9999883516572665]),
    (100.0, [6.0761822150380839e-5, 0.02410608936556684, 0.15986207789206168, 0.30908678291544329, 0.61760005984984826, 0.84013792210793832, 0.98092234048633866, 0.99999877491329325]),
];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn threads() -> usize {
    std::env::var("GENBOUND_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn slope_line(report: &ExperimentReport) -> (f64, f64, f64) {
    let r = report.regression.as_ref().expect("regression on at least three sample sizes");
    (r.slope.estimate, r.slope.ci_low, r.slope.ci_high)
}

fn rate_paper_full(report: &ExperimentReport, secs: f64) -> Outcome {
    let (b, lo, hi) = slope_line(report);
    let pass = (-0.65..=-0.40).contains(&b) && lo < REFERENCE_SLOPE && REFERENCE_SLOPE < hi;
    outcome(pass, format!("slope {b:.4}, 95% CI ({lo:.4}, {hi:.4}), target {REFERENCE_SLOPE} inside: {}; {secs:.0}s", lo < REFERENCE_SLOPE && REFERENCE_SLOPE < hi))
}

fn rate_desk(report: &ExperimentReport, secs: f64) -> Outcome {
    let (b, lo, hi) = slope_line(report);
    let pass = (-0.65..=-0.40).contains(&b) && secs <= 600.0;
    outcome(pass, format!("slope {b:.4}, 95% CI ({lo:.4}, {hi:.4}); {secs:.0}s (limit 600s)"))
}

fn dominance(paper: &ExperimentReport, desk: &ExperimentReport) -> Outcome {
    let (p, d) = (paper.bound_violations.len(), desk.bound_violations.len());
    let ratio = |r: &ExperimentReport| r.per_n.iter().map(|s| s.mean_abs_gen_error / s.bound).fold(0.0, f64::max);
    outcome(
        p <= 1 && d <= 1,
        format!("violations paper-full {p}, desk-reduced {d}; max mean/bound {:.3e} and {:.3e}", ratio(paper), ratio(desk)),
    )
}

fn a_priori_constants() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_genbound");
    let out = match Command::new(bin).args(["bound", "--preset", "paper-full", "--mode", "frozen", "--n", "250"]).output() {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("cannot run {bin}: {e}")),
    };
    if !out.status.success() {
        return outcome(false, format!("bound exited with {}", out.status));
    }
    let v: serde_json::Value = match serde_json::from_slice(&out.stdout) {
        Ok(v) => v,
        Err(e) => return outcome(false, format!("unparsable output: {e}")),
    };
    let get = |ptr: &str| v.pointer(ptr).and_then(|x| x.as_f64()).unwrap_or(f64::NAN);
    let (pi1, c1, b) = (get("/decay_product"), get("/constants/C1"), get("/bounds/prop4.1a"));
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let pass = rel(pi1, PI1_REF) <= 1e-10 && rel(c1, C1_REF) <= 1e-10 && rel(b, GEN250_REF) <= 1e-10;
    outcome(
        pass,
        format!("Pi1 {pi1:.15} (rel {:.1e}), C1 {c1:.12} (rel {:.1e}), n=250 bound {b:.6}", rel(pi1, PI1_REF), rel(c1, C1_REF)),
    )
}

fn moment_suite() -> Outcome {
    let n = 250;
    let mut violations = 0;
    let mut norms = Vec::with_capacity(100);
    let mut bound = f64::NAN;
    for mode in [Mode::Frozen, Mode::Joint] {
        let cfg = ExperimentConfig::preset(Preset::DeskReduced, mode);
        let spec = cfg.data_spec().expect("preset data");
        let fixed = cfg.frozen_w().expect("preset w");
        if let Some(w) = &fixed {
            let inputs = cfg.bound_inputs(Some(frobenius(&w.view())));
            bound = moment_bound_frozen(1, &inputs).expect("frozen moment bound");
        }
        for rep in 0..100 {
            let seed = cfg.cell_seed(n, rep);
            let set = sample_rho(&spec, n, derive_seed(seed, &[label::DATASET])).expect("sample");
            let tc = cfg.train_config(n, fixed.clone(), seed);
            let traj = train(&tc, DataSource::Dataset(&set), seed).expect("training");
            let check = check_norm_recursions(&traj, &tc);
            violations += check.total();
            if mode == Mode::Joint && check.sum_step + check.v_step + check.w_step > 0 {
                eprintln!("joint rep {rep}: {check:?}");
            }
            if mode == Mode::Frozen {
                norms.push(traj.final_record().v_norm);
            }
        }
    }
    let (mean, sd) = mean_sd(&norms);
    let se = sd / (norms.len() as f64).sqrt();
    outcome(
        mean <= bound + 2.0 * se && violations == 0,
        format!("mean |V(T)| {mean:.4} (se {se:.2e}) vs bound {bound:.4}; recursion violations {violations} over 200 runs"),
    )
}

fn coverage(threads: usize) -> Outcome {
    let mut cfg = ExperimentConfig::preset(Preset::PaperFull, Mode::Frozen);
    cfg.ns = vec![1000];
    cfg.repetitions = 200;
    cfg.zetas = vec![0.1];
    let started = Instant::now();
    let report = match run_experiment(&cfg, threads) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let c = &report.coverage[0].result;
    outcome(
        c.trials == 200 && c.frequency >= 0.9,
        format!(
            "{}/{} within radius {:.4} (frequency {:.3}, target {:.2}); {:.0}s",
            c.successes,
            c.trials,
            c.bound,
            c.frequency,
            c.target,
            started.elapsed().as_secs_f64()
        ),
    )
}

fn gradients() -> Outcome {
    let mut s = Stream::new(20_240_601);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let acts = [ActivationKind::Softplus, ActivationKind::Tanh, ActivationKind::SigmoidShifted];
    for case in 0..120 {
        let a = acts[case % 3];
        let k = LossKind::Huber { delta: 0.25 + 0.75 * s.uniform() };
        let (d_in, d, d_out) = (1 + s.index(4), 1 + s.index(5), 1 + s.index(3));
        let lambda = 0.05 + 0.5 * s.uniform();
        let v = Array2::from_shape_simple_fn((d_in, d), || s.gaussian());
        let w = Array2::from_shape_simple_fn((d, d_out), || s.gaussian());
        let p = ParamState::new(v, w).expect("finite parameters");
        let mut x = ndarray::Array1::from_shape_simple_fn(d_in, || s.gaussian());
        let xn = x.dot(&x).sqrt();
        x /= xn.max(1.0);
        let y = ndarray::Array1::from_shape_simple_fn(d_out, || 0.5 * s.gaussian());
        let gv = grad_v(x.view(), y.view(), &p, lambda, a, k).expect("grad v");
        let gw = grad_w(x.view(), y.view(), &p, lambda, a, k).expect("grad w");
        let h = 1e-6;
        let f = |q: &ParamState| reg_loss(x.view(), y.view(), q, lambda, a, k).expect("loss");
        let mut num = 0.0;
        let mut den = 0.0;
        for (which, analytic) in [(0, &gv), (1, &gw)] {
            for idx in ndarray::indices(analytic.dim()) {
                let mut plus = p.clone();
                let mut minus = p.clone();
                let (mp, mm) = if which == 0 { (&mut plus.v, &mut minus.v) } else { (&mut plus.w, &mut minus.w) };
                mp[idx] += h;
                mm[idx] -= h;
                let fd = (f(&plus) - f(&minus)) / (2.0 * h);
                num += (fd - analytic[idx]).powi(2);
                den += analytic[idx].powi(2);
            }
        }
        worst = worst.max(num.sqrt() / den.sqrt().max(1e-12));
        count += 1;
    }
    outcome(worst <= 1e-5, format!("{count} instances, max relative error {worst:.2e}"))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..n {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

fn dist(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn transport() -> Outcome {
    let mut s = Stream::new(77);
    let mut worst_oracle: f64 = 0.0;
    for case in 0..50 {
        let n = 1 + case % 6;
        let dim = 1 + s.index(4);
        let a = Array2::from_shape_simple_fn((n, dim), || s.gaussian());
        let b = Array2::from_shape_simple_fn((n, dim), || s.gaussian());
        let brute = permutations(n)
            .iter()
            .map(|p| (0..n).map(|i| dist(a.row(i), b.row(p[i]))).sum::<f64>() / n as f64)
            .fold(f64::INFINITY, f64::min);
        let w = w1_exact(&DiscreteMeasure::uniform(a).unwrap(), &DiscreteMeasure::uniform(b).unwrap()).unwrap().0;
        worst_oracle = worst_oracle.max((w - brute).abs());
    }

    let mut metric_failures = 0;
    for _ in 0..40 {
        let mut make = || {
            let n = 1 + s.index(6);
            let pts = Array2::from_shape_simple_fn((n, 3), || s.gaussian());
            let raw: Vec<f64> = (0..n).map(|_| 0.1 + s.uniform()).collect();
            let total: f64 = raw.iter().sum();
            let mut wts: ndarray::Array1<f64> = raw.iter().map(|v| v / total).collect();
            wts[0] += 1.0 - wts.sum();
            DiscreteMeasure::new(pts, wts).unwrap()
        };
        let (a, b, c) = (make(), make(), make());
        let w = |x: &DiscreteMeasure, y: &DiscreteMeasure| w1_exact(x, y).unwrap().0;
        let (ab, ba, bc, ac, aa) = (w(&a, &b), w(&b, &a), w(&b, &c), w(&a, &c), w(&a, &a));
        if (ab - ba).abs() > 1e-9 || ac > ab + bc + 1e-9 || ab < 0.0 || aa.abs() > 1e-9 || ab <= 0.0 {
            metric_failures += 1;
        }
        for k in 0..3 {
            let mean = |m: &DiscreteMeasure| m.points.column(k).dot(&m.weights);
            if mean(&a) - mean(&b) > ab + 1e-9 {
                metric_failures += 1;
            }
        }
    }

    let started = Instant::now();
    let fit = fit_rate(PointSource::UnitCube { dim: 5 }, &[16, 32, 64, 128, 256], 20, 16, 42).expect("rate fit");
    let secs = started.elapsed().as_secs_f64();
    let pass = worst_oracle <= 1e-9 && metric_failures == 0 && (-0.30..=-0.10).contains(&fit.exponent) && secs <= 300.0;
    outcome(
        pass,
        format!(
            "oracle max gap {worst_oracle:.1e} over 50 instances; metric failures {metric_failures}; D=5 exponent {:.4}, C_hat {:.4}, {secs:.0}s",
            fit.exponent, fit.c_hat
        ),
    )
}

fn statistics() -> Outcome {
    let mut worst: f64 = 0.0;
    for (dof, row) in T_TABLE {
        for (t, expected) in T_POINTS.iter().zip(row) {
            worst = worst.max((t_cdf(*t, dof) - expected).abs());
        }
    }
    let pts: Vec<(f64, f64)> = (1..=20).map(|k| {
        let n = 250.0 * k as f64;
        (n, (-1.0f64).exp() * n.powf(-0.5))
    }).collect();
    let r = ols_loglog(&pts).expect("regression");
    let (es, ei) = ((r.slope.estimate + 0.5).abs(), (r.intercept.estimate + 1.0).abs());
    outcome(
        worst <= 1e-8 && es <= 1e-10 && ei <= 1e-10,
        format!("t-CDF max error {worst:.1e}; power-law slope error {es:.1e}, intercept error {ei:.1e}"),
    )
}

fn main() {
    let threads = threads();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut report = |name: &'static str, o: Outcome| {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, o));
    };

    report("gradient correctness", gradients());
    report("statistics oracle", statistics());
    report("a-priori constants", a_priori_constants());
    report("transport oracle", transport());
    report("moment-bound property suite", moment_suite());

    let desk_cfg = ExperimentConfig::preset(Preset::DeskReduced, Mode::Frozen);
    let started = Instant::now();
    let desk = run_experiment(&desk_cfg, 1).expect("desk-reduced run");
    let desk_secs = started.elapsed().as_secs_f64();
    report("rate reproduction (desk-reduced)", rate_desk(&desk, desk_secs));

    let paper_cfg = ExperimentConfig::preset(Preset::PaperFull, Mode::Frozen);
    let started = Instant::now();
    let paper = run_experiment(&paper_cfg, threads).expect("paper-full run");
    let paper_secs = started.elapsed().as_secs_f64();
    report("rate reproduction (paper-full, frozen)", rate_paper_full(&paper, paper_secs));
    report("bound dominance", dominance(&paper, &desk));
    report("deviation coverage", coverage(threads));

    let failed = results.iter().filter(|r| !r.1.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
