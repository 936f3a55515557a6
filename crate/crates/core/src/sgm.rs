//! He initialization, learning-rate schedules and the stochastic gradient
//! method
//!
//! ```text
//! V(t+1) = V(t) − η_V(t) ∇_v L_k(Z⁽ᵗ⁾, V(t), W(t))
//! W(t+1) = W(t) − η_W(t) ∇_w L_k(Z⁽ᵗ⁾, V(t), W(t))
//! ```
//!
//! where `L_k` is the batch mean of the regularized loss. Each epoch draws a
//! batch of size `k` from its own random stream, either fresh from ρ or with
//! replacement from a stored dataset.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::data::{DataSpec, Dataset};
use crate::error::{config, usage, Result};
use crate::model::{loss_grad, regularizer, ActivationKind, LossKind, ParamState};
use crate::rng::{derive_seed, label, Stream};

/// Learning-rate schedule `t ↦ η(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Schedule {
    Constant { eta: f64 },
    /// `η₀ / aᵗ` with `a > 1`.
    PolynomialDecay { eta0: f64, base: f64 },
}

impl Schedule {
    pub const ZERO: Schedule = Schedule::Constant { eta: 0.0 };

    #[inline]
    pub fn rate(&self, t: usize) -> f64 {
        match *self {
            Schedule::Constant { eta } => eta,
            Schedule::PolynomialDecay { eta0, base } => eta0 / base.powf(t as f64),
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Schedule::Constant { eta } => eta == 0.0,
            Schedule::PolynomialDecay { eta0, .. } => eta0 == 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Schedule::Constant { eta } if eta.is_finite() => Ok(()),
            Schedule::PolynomialDecay { eta0, base } if eta0.is_finite() && base > 1.0 && base.is_finite() => Ok(()),
            Schedule::PolynomialDecay { base, .. } if !(base > 1.0) => {
                config(format!("polynomial decay base must exceed 1, got {base}"))
            }
            other => config(format!("non-finite schedule {other:?}")),
        }
    }
}

/// Per-layer schedules over a horizon of `epochs` steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningRates {
    pub v: Schedule,
    pub w: Schedule,
    pub epochs: usize,
}

impl LearningRates {
    /// `η_V = η_W = η`.
    pub fn joint(eta: Schedule, epochs: usize) -> Self {
        Self { v: eta, w: eta, epochs }
    }

    /// `η_W ≡ 0`.
    pub fn frozen(eta_v: Schedule, epochs: usize) -> Self {
        Self {
            v: eta_v,
            w: Schedule::ZERO,
            epochs,
        }
    }

    #[inline]
    pub fn eta_v(&self, t: usize) -> f64 {
        self.v.rate(t)
    }

    #[inline]
    pub fn eta_w(&self, t: usize) -> f64 {
        self.w.rate(t)
    }

    /// Checks `0 ≤ η_W(t) ≤ η_V(t) ≤ 1/λ` for every `t < epochs`.
    pub fn validate(&self, lambda: f64) -> Result<()> {
        self.v.validate()?;
        self.w.validate()?;
        if !(lambda > 0.0) {
            return config(format!("lambda must be positive, got {lambda}"));
        }
        let cap = 1.0 / lambda;
        for t in 0..self.epochs {
            let (ev, ew) = (self.eta_v(t), self.eta_w(t));
            if !(0.0 <= ew && ew <= ev && ev <= cap) {
                return config(format!(
                    "learning rates at t={t} violate 0 <= eta_W <= eta_V <= 1/lambda: eta_W={ew}, eta_V={ev}, 1/lambda={cap}"
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub d_in: usize,
    /// Hidden width `d`.
    pub hidden: usize,
    pub d_out: usize,
    pub lambda: f64,
    pub rates: LearningRates,
    pub batch_size: usize,
    pub activation: ActivationKind,
    pub loss: LossKind,
    /// Keep `W` fixed during training (requires `η_W ≡ 0`).
    pub frozen_w: bool,
    /// Replaces the He draw of `W(0)` when present.
    #[serde(default)]
    pub fixed_w: Option<Array2<f64>>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    pub seed: u64,
}

pub fn default_kappa() -> f64 {
    2.0
}

impl TrainConfig {
    pub fn epochs(&self) -> usize {
        self.rates.epochs
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_in == 0 || self.hidden == 0 || self.d_out == 0 {
            return config("dimensions d_in, d, d_out must be positive");
        }
        if self.batch_size == 0 {
            return config("batch size must be at least 1");
        }
        if !(self.kappa > 0.0) {
            return config(format!("kappa must be positive, got {}", self.kappa));
        }
        self.loss.validate()?;
        self.rates.validate(self.lambda)?;
        if self.frozen_w && !self.rates.w.is_zero() {
            return config("frozen W requires eta_W = 0");
        }
        if let Some(w) = &self.fixed_w {
            if w.dim() != (self.hidden, self.d_out) {
                return config(format!(
                    "fixed w has shape {:?}, expected ({}, {})",
                    w.dim(),
                    self.hidden,
                    self.d_out
                ));
            }
        }
        Ok(())
    }
}

/// `V(0)` with i.i.d. N(0, κ/d) entries and `W(0)` with N(0, κ/d_out) entries,
/// drawn in that order (row-major) from one stream.
pub fn he_init(cfg: &TrainConfig, seed: u64) -> Result<ParamState> {
    if !(cfg.kappa > 0.0) {
        return config(format!("kappa must be positive, got {}", cfg.kappa));
    }
    let mut s = Stream::new(seed);
    let sd_v = (cfg.kappa / cfg.hidden as f64).sqrt();
    let mut v = Array2::zeros((cfg.d_in, cfg.hidden));
    s.fill_gaussian(v.as_slice_mut().expect("standard layout"), sd_v);
    let w = match &cfg.fixed_w {
        Some(w) => w.clone(),
        None => {
            let sd_w = (cfg.kappa / cfg.d_out as f64).sqrt();
            let mut w = Array2::zeros((cfg.hidden, cfg.d_out));
            s.fill_gaussian(w.as_slice_mut().expect("standard layout"), sd_w);
            w
        }
    };
    ParamState::new(v, w)
}

/// Mean gradients of the regularized loss over a batch, plus the batch loss `L_k`.
#[derive(Clone, Debug)]
pub struct BatchGradients {
    pub v: Array2<f64>,
    /// `None` when the caller asked to skip the output-layer gradient.
    pub w: Option<Array2<f64>>,
    pub loss: f64,
}

fn batch_gradients_impl(
    xs: ArrayView2<f64>,
    ys: ArrayView2<f64>,
    p: &ParamState,
    lambda: f64,
    a: ActivationKind,
    k: LossKind,
    with_w: bool,
) -> Result<BatchGradients> {
    let n = xs.nrows();
    if n == 0 {
        return usage("empty batch");
    }
    if xs.ncols() != p.d_in() || ys.ncols() != p.d_out() || ys.nrows() != n {
        return config("batch shape does not match the parameters");
    }
    let pre = xs.dot(&p.v);
    let hidden = pre.mapv(|u| a.eval(u));
    let out = hidden.dot(&p.w);
    let mut g = Array2::zeros(out.raw_dim());
    let mut data_loss = 0.0;
    for ((o, y), mut gi) in out.axis_iter(Axis(0)).zip(ys.axis_iter(Axis(0))).zip(g.axis_iter_mut(Axis(0))) {
        data_loss += crate::model::loss(o, y, k);
        gi.assign(&loss_grad(o, y, k).0);
    }
    let inv = 1.0 / n as f64;
    // row i: σ′(uᵢ) ⊙ (W gᵢ)
    let mut m = g.dot(&p.w.t());
    Zip::from(&mut m).and(&pre).for_each(|mi, &u| *mi *= a.derivative(u));
    let mut gv = xs.t().dot(&m);
    gv.zip_mut_with(&p.v, |gij, &vij| *gij = *gij * inv + lambda * vij);
    let gw = with_w.then(|| {
        let mut gw = hidden.t().dot(&g);
        gw.zip_mut_with(&p.w, |gij, &wij| *gij = *gij * inv + lambda * wij);
        gw
    });
    Ok(BatchGradients {
        v: gv,
        w: gw,
        loss: data_loss * inv + 0.5 * lambda * regularizer(p),
    })
}

/// Arithmetic means of `grad_v` and `grad_w` over the batch.
pub fn batch_gradients(batch: &Dataset, p: &ParamState, cfg: &TrainConfig) -> Result<(Array2<f64>, Array2<f64>)> {
    let g = batch_gradients_impl(batch.xs.view(), batch.ys.view(), p, cfg.lambda, cfg.activation, cfg.loss, true)?;
    Ok((g.v, g.w.expect("requested")))
}

fn apply_step(p: &mut ParamState, g: &BatchGradients, t: usize, cfg: &TrainConfig) {
    let ev = cfg.rates.eta_v(t);
    p.v.scaled_add(-ev, &g.v);
    if !cfg.frozen_w {
        if let Some(gw) = &g.w {
            p.w.scaled_add(-cfg.rates.eta_w(t), gw);
        }
    }
}

/// One SGM update at epoch `t`; `W` is untouched when frozen.
pub fn sgm_step(p: &ParamState, batch: &Dataset, t: usize, cfg: &TrainConfig) -> Result<ParamState> {
    if t >= cfg.epochs() {
        return usage(format!("step index {t} outside horizon T={}", cfg.epochs()));
    }
    let g = batch_gradients_impl(
        batch.xs.view(),
        batch.ys.view(),
        p,
        cfg.lambda,
        cfg.activation,
        cfg.loss,
        !cfg.frozen_w,
    )?;
    let mut next = p.clone();
    apply_step(&mut next, &g, t, cfg);
    Ok(next)
}

/// Where training batches come from.
#[derive(Clone, Copy, Debug)]
pub enum DataSource<'a> {
    /// Fresh i.i.d. draws from ρ every epoch.
    Distribution(&'a DataSpec),
    /// Draws with replacement from a stored dataset.
    Dataset(&'a Dataset),
}

impl DataSource<'_> {
    fn dims(&self) -> (usize, usize) {
        match self {
            DataSource::Distribution(s) => (s.d_in(), s.d_out()),
            DataSource::Dataset(d) => (d.d_in(), d.d_out()),
        }
    }

    fn draw_batch(&self, k: usize, s: &mut Stream) -> Result<Dataset> {
        match self {
            DataSource::Distribution(spec) => {
                let mut xs = Array2::zeros((k, spec.d_in()));
                let mut ys = Array2::zeros((k, spec.d_out()));
                for (x, y) in xs.rows_mut().into_iter().zip(ys.rows_mut()) {
                    spec.draw_into(s, x, y);
                }
                Dataset::new(xs, ys)
            }
            DataSource::Dataset(ds) => {
                if ds.is_empty() {
                    return usage("training dataset is empty");
                }
                let idx: Vec<usize> = (0..k).map(|_| s.index(ds.len())).collect();
                Ok(ds.select(&idx))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub t: usize,
    pub v_norm: f64,
    pub w_norm: f64,
    /// `L_k(Z⁽ᵗ⁾, V(t), W(t))`; absent at `t = T`.
    pub batch_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<EpochRecord>,
    pub initial: ParamState,
    pub final_state: ParamState,
}

/// Runs `T` SGM steps from the He initialization.
///
/// `W(0)` and `V(0)` come from `derive_seed(seed, [INIT])`; the batch of
/// epoch `t` comes from stream `t` of `derive_seed(seed, [BATCHES])`.
pub fn train(cfg: &TrainConfig, source: DataSource<'_>, seed: u64) -> Result<Trajectory> {
    cfg.validate()?;
    if source.dims() != (cfg.d_in, cfg.d_out) {
        return config(format!(
            "data dimensions {:?} do not match the network ({}, {})",
            source.dims(),
            cfg.d_in,
            cfg.d_out
        ));
    }
    let initial = he_init(cfg, derive_seed(seed, &[label::INIT]))?;
    let batch_seed = derive_seed(seed, &[label::BATCHES]);
    let mut p = initial.clone();
    let mut records = Vec::with_capacity(cfg.epochs() + 1);
    for t in 0..cfg.epochs() {
        let mut s = Stream::with_stream(batch_seed, t as u64);
        let batch = source.draw_batch(cfg.batch_size, &mut s)?;
        let g = batch_gradients_impl(
            batch.xs.view(),
            batch.ys.view(),
            &p,
            cfg.lambda,
            cfg.activation,
            cfg.loss,
            !cfg.frozen_w,
        )?;
        records.push(EpochRecord {
            t,
            v_norm: p.v_norm(),
            w_norm: p.w_norm(),
            batch_loss: Some(g.loss),
        });
        apply_step(&mut p, &g, t, cfg);
    }
    records.push(EpochRecord {
        t: cfg.epochs(),
        v_norm: p.v_norm(),
        w_norm: p.w_norm(),
        batch_loss: None,
    });
    p.validate()?;
    Ok(Trajectory {
        records,
        initial,
        final_state: p,
    })
}

/// Counts of epochs at which a norm recursion failed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RecursionCheck {
    pub steps: usize,
    /// `‖V(t+1)‖ ≤ (1 − η_V λ)‖V(t)‖ + η_V ‖W(t)‖`
    pub v_step: usize,
    /// `‖W(t+1)‖ ≤ (1 − η_W λ)‖W(t)‖ + η_V ‖V(t)‖`
    pub w_step: usize,
    /// `‖V(t+1)‖ + ‖W(t+1)‖ ≤ (1 + (1 − λ)η)(‖V(t)‖ + ‖W(t)‖)`, checked only when `η_V = η_W`.
    pub sum_step: usize,
    /// Frozen mode: `‖V(t)‖ ≤ ‖V(0)‖Π(t) + (‖w‖/λ)(1 − Π(t))` with `Π(t) = ∏_{s<t}(1 − η_V(s)λ)`.
    pub frozen_unrolled: usize,
}

impl RecursionCheck {
    pub fn total(&self) -> usize {
        self.v_step + self.w_step + self.sum_step + self.frozen_unrolled
    }
}

const ROUNDING: f64 = 1e-12;

fn exceeds(lhs: f64, rhs: f64) -> bool {
    lhs > rhs * (1.0 + ROUNDING) + ROUNDING
}

pub fn check_norm_recursions(traj: &Trajectory, cfg: &TrainConfig) -> RecursionCheck {
    let lambda = cfg.lambda;
    let mut out = RecursionCheck {
        steps: traj.records.len().saturating_sub(1),
        ..Default::default()
    };
    let w0 = traj.records.first().map_or(0.0, |r| r.w_norm);
    let v0 = traj.records.first().map_or(0.0, |r| r.v_norm);
    let mut prod = 1.0;
    for pair in traj.records.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let (ev, ew) = (cfg.rates.eta_v(a.t), cfg.rates.eta_w(a.t));
        if exceeds(b.v_norm, (1.0 - ev * lambda) * a.v_norm + ev * a.w_norm) {
            out.v_step += 1;
        }
        if exceeds(b.w_norm, (1.0 - ew * lambda) * a.w_norm + ev * a.v_norm) {
            out.w_step += 1;
        }
        if ev == ew && exceeds(b.v_norm + b.w_norm, (1.0 + (1.0 - lambda) * ev) * (a.v_norm + a.w_norm)) {
            out.sum_step += 1;
        }
        prod *= 1.0 - ev * lambda;
        if cfg.frozen_w && exceeds(b.v_norm, v0 * prod + w0 / lambda * (1.0 - prod)) {
            out.frozen_unrolled += 1;
        }
    }
    out
}

impl Trajectory {
    pub fn final_record(&self) -> &EpochRecord {
        self.records.last().expect("trajectory has at least the initial record")
    }

    pub fn batch_losses(&self) -> Array1<f64> {
        self.records.iter().filter_map(|r| r.batch_loss).collect()
    }
}
