//! Generalization-error measurement, Monte-Carlo risk, log-log regression
//! with t-based inference, and coverage checks for probabilistic bounds.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{DataSpec, Dataset};
use crate::error::{usage, Result};
use crate::model::{forward_batch, losses_rows, ActivationKind, LossKind, ParamState};
use crate::rng::Stream;

const RISK_CHUNK: usize = 2048;

/// `(1/N) Σ l(f(Xⱼ), Yⱼ)` over `N` fresh draws from ρ.
///
/// Draws are consumed in order from a single stream and summed in that order,
/// so the estimate for `N` shares its first terms with the estimate for `2N`.
pub fn mc_true_risk(
    p: &ParamState,
    spec: &DataSpec,
    activation: ActivationKind,
    loss: LossKind,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples == 0 {
        return usage("Monte-Carlo sample size must be at least 1");
    }
    if spec.d_in() != p.d_in() || spec.d_out() != p.d_out() {
        return usage("network and data dimensions disagree");
    }
    let mut s = Stream::new(seed);
    let mut xs = Array2::zeros((RISK_CHUNK.min(samples), spec.d_in()));
    let mut ys = Array2::zeros((RISK_CHUNK.min(samples), spec.d_out()));
    let mut total = 0.0;
    let mut left = samples;
    while left > 0 {
        let k = left.min(RISK_CHUNK);
        for i in 0..k {
            spec.draw_into(&mut s, xs.row_mut(i), ys.row_mut(i));
        }
        let rows = ndarray::s![..k, ..];
        let pred = forward_batch(xs.slice(rows), p, activation)?;
        for l in losses_rows(pred.view(), ys.slice(rows), loss) {
            total += l;
        }
        left -= k;
    }
    Ok(total / samples as f64)
}

/// Average loss over a dataset.
pub fn empirical_risk(ds: &Dataset, p: &ParamState, activation: ActivationKind, loss: LossKind) -> Result<f64> {
    if ds.is_empty() {
        return usage("empirical risk of an empty dataset");
    }
    let pred = forward_batch(ds.xs.view(), p, activation)?;
    Ok(losses_rows(pred.view(), ds.ys.view(), loss).iter().sum::<f64>() / ds.len() as f64)
}

/// `ε_gen = true risk − training average`.
pub fn gen_error(
    train: &Dataset,
    p: &ParamState,
    activation: ActivationKind,
    loss: LossKind,
    true_risk: f64,
) -> Result<f64> {
    Ok(true_risk - empirical_risk(train, p, activation, loss)?)
}

/// `ln Γ(x)` for `x > 0` (Lanczos, `g = 7`).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    reg_inc_beta_split(a, b, x, 1.0 - x)
}

/// `I_x(a, b)` with `y = 1 − x` supplied separately to keep precision near `x = 1`.
fn reg_inc_beta_split(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * y.ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, y) / b
    }
}

/// `I_{ν/(ν+t²)}(ν/2, 1/2)`, the two-sided tail mass beyond `|t|`.
fn t_tail_mass(t: f64, dof: f64) -> f64 {
    let denom = dof + t * t;
    reg_inc_beta_split(dof / 2.0, 0.5, dof / denom, t * t / denom)
}

/// Student-t CDF with `dof` degrees of freedom.
pub fn t_cdf(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * t_tail_mass(t, dof);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// `P(|T| ≥ |t|)`.
pub fn t_two_sided_p(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    t_tail_mass(t, dof).clamp(0.0, 1.0)
}

/// Inverse of [`t_cdf`] by bisection.
pub fn t_quantile(prob: f64, dof: f64) -> f64 {
    assert!(prob > 0.0 && prob < 1.0, "probability {prob} outside (0, 1)");
    let (mut lo, mut hi) = (-1.0, 1.0);
    while t_cdf(lo, dof) > prob {
        lo *= 2.0;
    }
    while t_cdf(hi, dof) < prob {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t_cdf(mid, dof) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * mid.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Coefficient {
    fn new(estimate: f64, std_error: f64, t_crit: f64, dof: f64) -> Self {
        let (t_stat, p_value) = if std_error > 0.0 {
            let t = estimate / std_error;
            (t, t_two_sided_p(t, dof))
        } else if estimate == 0.0 {
            (0.0, 1.0)
        } else {
            (estimate.signum() * f64::INFINITY, 0.0)
        };
        Self {
            estimate,
            std_error,
            t_stat,
            p_value,
            ci_low: estimate - t_crit * std_error,
            ci_high: estimate + t_crit * std_error,
        }
    }

    pub fn ci_contains(&self, v: f64) -> bool {
        self.ci_low < v && v < self.ci_high
    }
}

/// Simple linear regression `y = a + b x` with 95% t intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionSummary {
    pub intercept: Coefficient,
    pub slope: Coefficient,
    pub dof: usize,
    pub r_squared: f64,
    pub points: usize,
}

impl RegressionSummary {
    /// Fixed-width table with one row per coefficient.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<10} {:>10} {:>10} {:>13} {:>11} {:>22}\n",
            "", "Mean", "Stdev", "t-statistics", "p-value", "95% conf. interval"
        );
        for (name, c) in [("intercept", &self.intercept), ("slope", &self.slope)] {
            let ci = format!("({:.3}, {:.3})", c.ci_low, c.ci_high);
            out.push_str(&format!(
                "{:<10} {:>10.4} {:>10.3} {:>13.3} {:>11.3e} {:>22}\n",
                name, c.estimate, c.std_error, c.t_stat, c.p_value, ci
            ));
        }
        out.push_str(&format!("dof = {}, R^2 = {:.4}\n", self.dof, self.r_squared));
        out
    }
}

/// Ordinary least squares of `ys` on `xs`.
pub fn ols(xs: &[f64], ys: &[f64]) -> Result<RegressionSummary> {
    if xs.len() != ys.len() {
        return usage("regression inputs differ in length");
    }
    let n = xs.len();
    if n < 3 {
        return usage(format!("regression needs at least 3 points, got {n}"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return usage("regression inputs must be finite");
    }
    let k = n as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return usage("regression needs at least two distinct abscissae");
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let dof = n - 2;
    let sigma2 = ssr / dof as f64;
    let se_slope = (sigma2 / sxx).sqrt();
    let se_intercept = (sigma2 * (1.0 / k + mx * mx / sxx)).sqrt();
    let t_crit = t_quantile(0.975, dof as f64);
    let r_squared = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    Ok(RegressionSummary {
        intercept: Coefficient::new(intercept, se_intercept, t_crit, dof as f64),
        slope: Coefficient::new(slope, se_slope, t_crit, dof as f64),
        dof,
        r_squared,
        points: n,
    })
}

/// OLS of `log mean` on `log n` for points `(n, mean)`.
pub fn ols_loglog(points: &[(f64, f64)]) -> Result<RegressionSummary> {
    if points.iter().any(|&(n, m)| !(n > 0.0) || !(m > 0.0)) {
        return usage("log-log regression needs positive sample sizes and means");
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    ols(&xs, &ys)
}

/// Empirical frequency with which realizations stay within a bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub trials: usize,
    pub successes: usize,
    pub frequency: f64,
    pub target: f64,
    pub std_error: f64,
    pub bound: f64,
}

impl CoverageResult {
    pub fn meets_target(&self) -> bool {
        self.frequency >= self.target
    }
}

pub fn coverage_test(samples: &[f64], bound: f64, zeta: f64) -> Result<CoverageResult> {
    if samples.is_empty() {
        return usage("coverage test needs at least one sample");
    }
    if !(zeta > 0.0 && zeta < 1.0) {
        return usage(format!("zeta must lie in (0, 1), got {zeta}"));
    }
    let successes = samples.iter().filter(|&&s| s <= bound).count();
    let frequency = successes as f64 / samples.len() as f64;
    Ok(CoverageResult {
        trials: samples.len(),
        successes,
        frequency,
        target: 1.0 - zeta,
        std_error: (frequency * (1.0 - frequency) / samples.len() as f64).sqrt(),
        bound,
    })
}
