//! Closed-form, a-priori evaluation of the moment, generalization,
//! deviation and Lipschitz bounds for SGM-trained two-layer networks.
//!
//! Nothing here trains a network or touches a random stream: every value is
//! a function of the dimensions, `λ`, `κ`, the learning-rate schedule and
//! (for frozen output layers) `‖w‖_F`. Two products drive all of them:
//!
//! ```text
//! Π₁ = ∏_{t<T} (1 − η_V(t) λ)          (decay)
//! Π₂ = ∏_{t<T} (1 + (1 − λ) η_V(t))    (growth)
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{config, usage, Result};
use crate::model::{ActivationKind, LossKind};
use crate::sgm::LearningRates;

/// Above this horizon products are accumulated as sums of logarithms.
const LOG_SPACE_HORIZON: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// `η_W ≡ 0`, output layer fixed at `w`.
    Frozen,
    /// `η_V = η_W = η`.
    Joint,
}

impl std::str::FromStr for Mode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frozen" => Ok(Mode::Frozen),
            "joint" => Ok(Mode::Joint),
            other => config(format!("unknown mode `{other}` (expected frozen or joint)")),
        }
    }
}

/// Which dimension pairs with `d_in` inside `C₂(p, T)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum C2Dims {
    /// `d_in^p + d^p`
    #[default]
    Hidden,
    /// `d_in^p + d_out^p`, matching the joint moment bound.
    Output,
}

/// Power of `κ` in the joint moment bound.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KappaExponent {
    /// `κ^p`
    #[default]
    Moment,
    /// `κ^d` with `d` the hidden width.
    HiddenWidth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub d_in: usize,
    pub hidden: usize,
    pub d_out: usize,
    pub lambda: f64,
    pub kappa: f64,
    pub rates: LearningRates,
    pub mode: Mode,
    /// `‖w‖_F`, required in frozen mode.
    #[serde(default)]
    pub w_norm: Option<f64>,
    #[serde(default)]
    pub zeta: Option<f64>,
    /// Empirically calibrated Fournier–Guillin constant.
    #[serde(default)]
    pub fg_constant: Option<f64>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub c2_dims: C2Dims,
    #[serde(default)]
    pub kappa_exponent: KappaExponent,
    #[serde(default)]
    pub activation: Option<ActivationKind>,
    #[serde(default)]
    pub loss: Option<LossKind>,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if self.d_in == 0 || self.hidden == 0 || self.d_out == 0 {
            return config("dimensions must be positive");
        }
        if !(self.kappa > 0.0) {
            return config(format!("kappa must be positive, got {}", self.kappa));
        }
        self.rates.validate(self.lambda)?;
        if let Some(z) = self.zeta {
            check_zeta(z)?;
        }
        if let Some(c) = self.fg_constant {
            if !(c > 0.0 && c.is_finite()) {
                return config(format!("Fournier-Guillin constant must be positive, got {c}"));
            }
        }
        if let Some(w) = self.w_norm {
            if !(w >= 0.0 && w.is_finite()) {
                return config(format!("w norm must be finite and nonnegative, got {w}"));
            }
        }
        Ok(())
    }

    /// `d_in + d_out`, the dimension of the data space.
    pub fn data_dim(&self) -> usize {
        self.d_in + self.d_out
    }

    fn w_norm(&self) -> Result<f64> {
        self.w_norm
            .ok_or_else(|| crate::Error::Usage("frozen-mode bounds need the norm of the fixed w".into()))
    }

    fn fg(&self) -> Result<f64> {
        self.fg_constant.ok_or_else(|| {
            crate::Error::Usage(
                "dimension-dependent bounds need the Fournier-Guillin constant C; calibrate it with `calibrate-c`".into(),
            )
        })
    }

    fn need(&self, mode: Mode) -> Result<()> {
        if self.mode != mode {
            return usage(format!("this bound applies to {mode:?} mode, inputs are {:?}", self.mode));
        }
        Ok(())
    }
}

fn check_zeta(z: f64) -> Result<()> {
    if !(z > 0.0 && z < 1.0) {
        return usage(format!("zeta must lie in (0, 1), got {z}"));
    }
    Ok(())
}

/// `m!! = m(m−2)(m−4)…`, with `0!! = (−1)!! = 1`.
///
/// Panics if the result overflows `u128` (`m > 56` odd or `m > 60` even is safe).
pub fn double_factorial(m: i64) -> u128 {
    assert!(m >= -1, "double factorial undefined for {m}");
    let mut acc: u128 = 1;
    let mut k = m;
    while k > 1 {
        acc = acc.checked_mul(k as u128).expect("double factorial overflow");
        k -= 2;
    }
    acc
}

fn double_factorial_f64(m: i64) -> f64 {
    let mut acc = 1.0;
    let mut k = m;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

fn product_of(factors: impl Iterator<Item = f64>, horizon: usize) -> f64 {
    if horizon > LOG_SPACE_HORIZON {
        let mut log_sum = 0.0;
        for f in factors {
            if f <= 0.0 {
                return 0.0;
            }
            log_sum += f.ln();
        }
        log_sum.exp()
    } else {
        factors.product()
    }
}

/// `Π₁ = ∏_{t<T} (1 − η_V(t) λ)`; 1 when `T = 0`.
pub fn decay_product(rates: &LearningRates, lambda: f64) -> f64 {
    let t = rates.epochs;
    product_of((0..t).map(|s| 1.0 - rates.eta_v(s) * lambda), t)
}

/// `Π₂ = ∏_{t<T} (1 + (1 − λ) η_V(t))`; 1 when `T = 0`.
pub fn growth_product(rates: &LearningRates, lambda: f64) -> f64 {
    let t = rates.epochs;
    product_of((0..t).map(|s| 1.0 + (1.0 - lambda) * rates.eta_v(s)), t)
}

fn check_p(p: u32) -> Result<()> {
    if p < 1 {
        return usage("moment order p must be at least 1");
    }
    Ok(())
}

/// Frozen-mode bound on `E‖V(T)‖^p_F`:
/// `(p−1)!! 2^{p−1} (κ d_in)^{p/2} Π₁^p + 2^{p−1} (‖w‖/λ)^p (1 − Π₁)^p`.
pub fn moment_bound_frozen(p: u32, inputs: &BoundInputs) -> Result<f64> {
    check_p(p)?;
    inputs.need(Mode::Frozen)?;
    let w = inputs.w_norm()?;
    let pi1 = decay_product(&inputs.rates, inputs.lambda);
    let pf = p as f64;
    let two = 2f64.powi(p as i32 - 1);
    Ok(double_factorial_f64(p as i64 - 1) * two * (inputs.kappa * inputs.d_in as f64).powf(pf / 2.0) * pi1.powi(p as i32)
        + two * (w / inputs.lambda).powi(p as i32) * (1.0 - pi1).powi(p as i32))
}

/// Joint-mode bound on `E[‖V(T)‖^p_F ‖W(T)‖^p_F]`:
/// `κ^e · ½ (2p−1)!! (d_in^p + d_out^p) Π₂^{2p}` with `e = p` by default.
pub fn moment_bound_joint(p: u32, inputs: &BoundInputs) -> Result<f64> {
    check_p(p)?;
    inputs.need(Mode::Joint)?;
    let pi2 = growth_product(&inputs.rates, inputs.lambda);
    let kappa_factor = match inputs.kappa_exponent {
        KappaExponent::Moment => inputs.kappa.powi(p as i32),
        KappaExponent::HiddenWidth => inputs.kappa.powf(inputs.hidden as f64),
    };
    let pi = p as i32;
    Ok(kappa_factor
        * 0.5
        * double_factorial_f64(2 * p as i64 - 1)
        * ((inputs.d_in as f64).powi(pi) + (inputs.d_out as f64).powi(pi))
        * pi2.powi(2 * pi))
}

/// Shared frozen-mode shape `a·Π₁ + (‖w‖²/λ)(1 − Π₁)`.
fn frozen_combination(inputs: &BoundInputs, leading: f64) -> Result<f64> {
    let w = inputs.w_norm()?;
    let pi1 = decay_product(&inputs.rates, inputs.lambda);
    Ok(w * leading * pi1 + w * w / inputs.lambda * (1.0 - pi1))
}

/// `C₁(w,T) = ‖w‖ √(κ d_in) Π₁ + (‖w‖²/λ)(1 − Π₁)`.
pub fn c1(inputs: &BoundInputs) -> Result<f64> {
    frozen_combination(inputs, (inputs.kappa * inputs.d_in as f64).sqrt())
}

/// `C₂(p,T) = (2p−1)!! 2^{p−1} (d_in^p + d^p) κ^p Π₂^{2p}`.
pub fn c2(p: u32, inputs: &BoundInputs) -> Result<f64> {
    check_p(p)?;
    let pi = p as i32;
    let pi2 = growth_product(&inputs.rates, inputs.lambda);
    let second = match inputs.c2_dims {
        C2Dims::Hidden => inputs.hidden,
        C2Dims::Output => inputs.d_out,
    } as f64;
    Ok(double_factorial_f64(2 * p as i64 - 1)
        * 2f64.powi(pi - 1)
        * ((inputs.d_in as f64).powi(pi) + second.powi(pi))
        * inputs.kappa.powi(pi)
        * pi2.powi(2 * pi))
}

/// `C₃(w,ζ,T) = ‖w‖ (√d_in + √d + √(2 log(4/ζ))) √(κ/d) Π₁ + (‖w‖²/λ)(1 − Π₁)`.
pub fn c3(zeta: f64, inputs: &BoundInputs) -> Result<f64> {
    check_zeta(zeta)?;
    frozen_spectral(inputs, (2.0 * (4.0 / zeta).ln()).sqrt())
}

fn frozen_spectral(inputs: &BoundInputs, tail: f64) -> Result<f64> {
    let d = inputs.hidden as f64;
    let leading = ((inputs.d_in as f64).sqrt() + d.sqrt() + tail) * (inputs.kappa / d).sqrt();
    frozen_combination(inputs, leading)
}

/// `C₄(w,T) = 2‖w‖ κ d_in Π₁² + 2(‖w‖³/λ²)(1 − Π₁)²`.
pub fn c4(inputs: &BoundInputs) -> Result<f64> {
    let w = inputs.w_norm()?;
    let pi1 = decay_product(&inputs.rates, inputs.lambda);
    Ok(2.0 * w * inputs.kappa * inputs.d_in as f64 * pi1 * pi1
        + 2.0 * w.powi(3) / (inputs.lambda * inputs.lambda) * (1.0 - pi1).powi(2))
}

fn joint_spectral(inputs: &BoundInputs, log_term: f64) -> f64 {
    let (d_in, d, d_out) = (inputs.d_in as f64, inputs.hidden as f64, inputs.d_out as f64);
    let pi2 = growth_product(&inputs.rates, inputs.lambda);
    3.0 * inputs.kappa * (2.0 + d_in / d + d / d_out + (2.0 / d + 2.0 / d_out) * log_term) * pi2 * pi2
}

/// `C₅(ζ,T) = 3κ (2 + d_in/d + d/d_out + (2/d + 2/d_out) log(8/ζ)) Π₂²`.
pub fn c5(zeta: f64, inputs: &BoundInputs) -> Result<f64> {
    check_zeta(zeta)?;
    Ok(joint_spectral(inputs, (8.0 / zeta).ln()))
}

/// Expected absolute generalization error for an independent test set:
/// `(1 + C₁) 2/√n` (frozen) or `(1 + C₂(1,T)) 2/√n` (joint).
pub fn gen_bound_independent(n: usize, inputs: &BoundInputs) -> Result<f64> {
    check_n(n)?;
    let c = match inputs.mode {
        Mode::Frozen => c1(inputs)?,
        Mode::Joint => c2(1, inputs)?,
    };
    Ok((1.0 + c) * 2.0 / (n as f64).sqrt())
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return usage("sample size n must be at least 1");
    }
    Ok(())
}

/// Radius holding with probability at least `1 − ζ`:
/// `(1 + C₃ or C₅) √((2/n) log(4/ζ))`.
pub fn deviation_bound(n: usize, zeta: f64, inputs: &BoundInputs) -> Result<f64> {
    check_n(n)?;
    check_zeta(zeta)?;
    let c = match inputs.mode {
        Mode::Frozen => c3(zeta, inputs)?,
        Mode::Joint => c5(zeta, inputs)?,
    };
    Ok((1.0 + c) * (2.0 / n as f64 * (4.0 / zeta).ln()).sqrt())
}

/// `√((1 + C₄)C) / n^{1/(d_in+d_out)}` (frozen) or with `C₂(2,T)` (joint).
pub fn gen_bound_dependent(n: usize, inputs: &BoundInputs) -> Result<f64> {
    check_n(n)?;
    let fg = inputs.fg()?;
    let c = match inputs.mode {
        Mode::Frozen => c4(inputs)?,
        Mode::Joint => c2(2, inputs)?,
    };
    Ok(((1.0 + c) * fg).sqrt() / (n as f64).powf(1.0 / inputs.data_dim() as f64))
}

/// `(Cn / log(2C/ζ))^{−1/(d_in+d_out)} (1 + C₃ or C₅)`.
pub fn dependent_deviation(n: usize, zeta: f64, inputs: &BoundInputs) -> Result<f64> {
    check_n(n)?;
    check_zeta(zeta)?;
    let fg = inputs.fg()?;
    let log_term = (2.0 * fg / zeta).ln();
    if !(log_term > 0.0) {
        return usage(format!("log(2C/zeta) = {log_term} is not positive; the deviation bound is undefined"));
    }
    let c = match inputs.mode {
        Mode::Frozen => c3(zeta, inputs)?,
        Mode::Joint => c5(zeta, inputs)?,
    };
    Ok((fg * n as f64 / log_term).powf(-1.0 / inputs.data_dim() as f64) * (1.0 + c))
}

/// Bound on `E[sup |∇_x ℓ_λ|^p]` over the support.
///
/// Frozen, `p = 1`: `‖w‖(√d_in + √d)√(κ/d) Π₁ + (‖w‖²/λ)(1 − Π₁)`.
/// Frozen, `p ≥ 2`: `(p−1)!! 2^{p−1} ‖w‖^p (κ d_in)^{p/2} Π₁^p + 2^{p−1} (‖w‖²/λ)^p (1 − Π₁)^p`.
/// Joint: `(2p−1)!!/2^{1−p} (d_in^p + d_out^p) κ^p Π₂^{2p}`.
pub fn lipschitz_bound(p: u32, inputs: &BoundInputs) -> Result<f64> {
    check_p(p)?;
    let pi = p as i32;
    match inputs.mode {
        Mode::Frozen if p == 1 => frozen_spectral(inputs, 0.0),
        Mode::Frozen => {
            let w = inputs.w_norm()?;
            let pi1 = decay_product(&inputs.rates, inputs.lambda);
            let two = 2f64.powi(pi - 1);
            Ok(double_factorial_f64(p as i64 - 1)
                * two
                * w.powi(pi)
                * (inputs.kappa * inputs.d_in as f64).powf(p as f64 / 2.0)
                * pi1.powi(pi)
                + two * (w * w / inputs.lambda).powi(pi) * (1.0 - pi1).powi(pi))
        }
        Mode::Joint => {
            let pi2 = growth_product(&inputs.rates, inputs.lambda);
            Ok(double_factorial_f64(2 * p as i64 - 1) / 2f64.powi(1 - pi)
                * ((inputs.d_in as f64).powi(pi) + (inputs.d_out as f64).powi(pi))
                * inputs.kappa.powi(pi)
                * pi2.powi(2 * pi))
        }
    }
}

/// Level-`(1 − ζ)` bound on `sup |∇_x ℓ_λ|`.
///
/// Frozen: `‖w‖(√d_in + √d + √(2 log(2/ζ)))√(κ/d) Π₁ + (‖w‖²/λ)(1 − Π₁)`.
/// Joint: `3κ(2 + d_in/d + d/d_out + (2/d + 2/d_out) log(4/ζ)) Π₂²`.
pub fn lipschitz_concentration(zeta: f64, inputs: &BoundInputs) -> Result<f64> {
    check_zeta(zeta)?;
    match inputs.mode {
        Mode::Frozen => frozen_spectral(inputs, (2.0 * (2.0 / zeta).ln()).sqrt()),
        Mode::Joint => Ok(joint_spectral(inputs, (4.0 / zeta).ln())),
    }
}

/// All constants and bounds computable from the given inputs, keyed by
/// proposition label (`prop3.1a`, `prop4.1a`, …, `cor5.4b`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub decay_product: f64,
    pub growth_product: f64,
    pub constants: BTreeMap<String, f64>,
    pub bounds: BTreeMap<String, f64>,
    /// Provenance of the Fournier–Guillin constant, when one was supplied.
    pub fg_constant_source: Option<String>,
    pub warnings: Vec<String>,
}

impl BoundReport {
    pub fn evaluate(inputs: &BoundInputs) -> Result<Self> {
        inputs.validate()?;
        let mut constants = BTreeMap::new();
        let mut bounds = BTreeMap::new();
        let mut warnings = Vec::new();
        let suffix = match inputs.mode {
            Mode::Frozen => "a",
            Mode::Joint => "b",
        };
        let key = |stem: &str| format!("{stem}{suffix}");

        if let Some(a) = inputs.activation {
            if !a.is_smooth() {
                warnings.push(format!("activation {a} is not C1; the bounds assume a C1 activation"));
            }
        }
        if let Some(l) = inputs.loss {
            if !l.is_smooth() {
                warnings.push(format!("loss {l} is not C1 at y1 = y2; the bounds assume a C1 loss"));
            }
        }
        if inputs.data_dim() < 5 {
            warnings.push(format!(
                "d_in + d_out = {} < 5: dimension-dependent bounds are outside their stated regime",
                inputs.data_dim()
            ));
        }

        match inputs.mode {
            Mode::Frozen => {
                if inputs.w_norm.is_none() {
                    return usage("frozen-mode report needs the norm of the fixed w");
                }
                constants.insert("C1".into(), c1(inputs)?);
                constants.insert("C4".into(), c4(inputs)?);
                if let Some(z) = inputs.zeta {
                    constants.insert("C3".into(), c3(z, inputs)?);
                }
                bounds.insert(key("prop3.1"), moment_bound_frozen(1, inputs)?);
                bounds.insert(key("prop5.3"), lipschitz_bound(1, inputs)?);
            }
            Mode::Joint => {
                if (0..inputs.rates.epochs).any(|t| inputs.rates.eta_v(t) != inputs.rates.eta_w(t)) {
                    warnings.push("joint-mode bounds assume eta_V = eta_W; eta_V is used".into());
                }
                constants.insert("C2(1,T)".into(), c2(1, inputs)?);
                constants.insert("C2(2,T)".into(), c2(2, inputs)?);
                if let Some(z) = inputs.zeta {
                    constants.insert("C5".into(), c5(z, inputs)?);
                }
                bounds.insert(key("prop3.1"), moment_bound_joint(1, inputs)?);
                bounds.insert(key("prop5.3"), lipschitz_bound(1, inputs)?);
                match inputs.kappa_exponent {
                    KappaExponent::Moment => warnings.push(
                        "joint moment bound evaluated with kappa^p; the kappa^d variant is available via literal-kappa-d".into(),
                    ),
                    KappaExponent::HiddenWidth => {
                        warnings.push("joint moment bound evaluated with kappa^d (literal variant)".into())
                    }
                }
                if inputs.c2_dims == C2Dims::Hidden {
                    warnings.push("C2 uses d_in^p + d^p; the joint moment bound uses d_in^p + d_out^p".into());
                }
            }
        }
        if let Some(z) = inputs.zeta {
            bounds.insert(key("cor5.4"), lipschitz_concentration(z, inputs)?);
        }
        if let Some(n) = inputs.n {
            bounds.insert(key("prop4.1"), gen_bound_independent(n, inputs)?);
            if let Some(z) = inputs.zeta {
                bounds.insert(key("prop4.2"), deviation_bound(n, z, inputs)?);
            }
            if inputs.fg_constant.is_some() {
                bounds.insert(key("prop5.1"), gen_bound_dependent(n, inputs)?);
                if let Some(z) = inputs.zeta {
                    match dependent_deviation(n, z, inputs) {
                        Ok(v) => {
                            bounds.insert(key("prop5.2"), v);
                        }
                        Err(e) => warnings.push(format!("{}: {e}", key("prop5.2"))),
                    }
                }
            } else {
                warnings.push(format!(
                    "{} skipped: no Fournier-Guillin constant (run calibrate-c)",
                    key("prop5.1")
                ));
            }
        }
        Ok(Self {
            inputs: inputs.clone(),
            decay_product: decay_product(&inputs.rates, inputs.lambda),
            growth_product: growth_product(&inputs.rates, inputs.lambda),
            constants,
            bounds,
            fg_constant_source: inputs.fg_constant.map(|_| "calibrated".to_string()),
            warnings,
        })
    }
}
