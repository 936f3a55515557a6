//! The two-layer network `f(x, v, w) = wᵀσ(vᵀx)`, its losses and the
//! closed-form gradients of the regularized loss
//! `ℓ_λ = l(f(x,v,w), y) + (λ/2)(‖v‖²_F + ‖w‖²_F)`.
//!
//! Gradients are analytic:
//!
//! ```text
//! ∇_v ℓ_λ = x (∇_{y₁}l)ᵀ wᵀ Σ + λ v,     Σ = Diag(σ′(vᵀx))
//! ∇_w ℓ_λ = σ(vᵀx) (∇_{y₁}l)ᵀ + λ w
//! ```
//!
//! ReLU and the Euclidean L¹ loss are not C¹. For those the kink is resolved
//! by the conventions `relu′(0) = 0` and `∇l = 0` at `y₁ = y₂`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationKind {
    Relu,
    /// `ln(1 + eˣ) − ln 2`, shifted so that σ(0) = 0.
    Softplus,
    Tanh,
    /// `1/(1 + e⁻ˣ) − 1/2`.
    SigmoidShifted,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 4] = [
        ActivationKind::Relu,
        ActivationKind::Softplus,
        ActivationKind::Tanh,
        ActivationKind::SigmoidShifted,
    ];

    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p() - std::f64::consts::LN_2,
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::SigmoidShifted => logistic(x) - 0.5,
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            ActivationKind::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Softplus => logistic(x),
            ActivationKind::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            ActivationKind::SigmoidShifted => {
                let s = logistic(x);
                s * (1.0 - s)
            }
        }
    }

    /// Whether the activation meets the C¹ requirement of the bounds.
    pub fn is_smooth(self) -> bool {
        !matches!(self, ActivationKind::Relu)
    }
}

#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActivationKind::Relu => "relu",
            ActivationKind::Softplus => "softplus",
            ActivationKind::Tanh => "tanh",
            ActivationKind::SigmoidShifted => "sigmoid-shifted",
        })
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(ActivationKind::Relu),
            "softplus" => Ok(ActivationKind::Softplus),
            "tanh" => Ok(ActivationKind::Tanh),
            "sigmoid-shifted" | "sigmoid" => Ok(ActivationKind::SigmoidShifted),
            other => config(format!("unknown activation `{other}`")),
        }
    }
}

/// Loss on `ℝ^{d_out} × ℝ^{d_out}`, a function of the residual `r = y₁ − y₂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LossKind {
    /// `|y₁ − y₂|`, Euclidean norm of the residual.
    L1Euclidean,
    /// `½|r|²` for `|r| ≤ δ`, else `δ(|r| − δ/2)`; 1-Lipschitz for `δ ≤ 1`.
    Huber { delta: f64 },
}

impl LossKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LossKind::L1Euclidean => Ok(()),
            LossKind::Huber { delta } if delta > 0.0 && delta <= 1.0 => Ok(()),
            LossKind::Huber { delta } => config(format!("huber delta must lie in (0, 1], got {delta}")),
        }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self, LossKind::Huber { .. })
    }

    /// Loss as a function of the residual norm.
    #[inline]
    fn of_norm(&self, r: f64) -> f64 {
        match *self {
            LossKind::L1Euclidean => r,
            LossKind::Huber { delta } => {
                if r <= delta {
                    0.5 * r * r
                } else {
                    delta * (r - 0.5 * delta)
                }
            }
        }
    }

    /// Scale `s` such that `∇_{y₁} l = s · r`.
    #[inline]
    fn grad_scale(&self, r: f64) -> f64 {
        match *self {
            LossKind::L1Euclidean => {
                if r > 0.0 {
                    1.0 / r
                } else {
                    0.0
                }
            }
            LossKind::Huber { delta } => {
                if r <= delta {
                    1.0
                } else {
                    delta / r
                }
            }
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossKind::L1Euclidean => f.write_str("l1"),
            LossKind::Huber { delta } => write!(f, "huber:{delta}"),
        }
    }
}

impl FromStr for LossKind {
    type Err = Error;

    /// Accepts `l1`, `l1-euclidean`, `huber` (δ = 1) and `huber:<δ>`.
    fn from_str(s: &str) -> Result<Self> {
        let kind = match s {
            "l1" | "l1-euclidean" => LossKind::L1Euclidean,
            "huber" => LossKind::Huber { delta: 1.0 },
            _ => match s.strip_prefix("huber:") {
                Some(d) => LossKind::Huber {
                    delta: d
                        .parse()
                        .map_err(|_| Error::Config(format!("bad huber delta `{d}`")))?,
                },
                None => return config(format!("unknown loss `{s}`")),
            },
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// The trainable pair `(V, W)` with `V ∈ ℝ^{d_in×d}` and `W ∈ ℝ^{d×d_out}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamState {
    pub v: Array2<f64>,
    pub w: Array2<f64>,
}

impl ParamState {
    pub fn new(v: Array2<f64>, w: Array2<f64>) -> Result<Self> {
        let p = Self { v, w };
        p.validate()?;
        Ok(p)
    }

    pub fn zeros(d_in: usize, d: usize, d_out: usize) -> Self {
        Self {
            v: Array2::zeros((d_in, d)),
            w: Array2::zeros((d, d_out)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.v.ncols() != self.w.nrows() {
            return config(format!(
                "hidden width mismatch: V is {}x{}, W is {}x{}",
                self.v.nrows(),
                self.v.ncols(),
                self.w.nrows(),
                self.w.ncols()
            ));
        }
        if !self.v.iter().chain(self.w.iter()).all(|x| x.is_finite()) {
            return config("parameter matrices contain non-finite entries");
        }
        Ok(())
    }

    pub fn d_in(&self) -> usize {
        self.v.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.v.ncols()
    }

    pub fn d_out(&self) -> usize {
        self.w.ncols()
    }

    pub fn v_norm(&self) -> f64 {
        frobenius(&self.v.view())
    }

    pub fn w_norm(&self) -> f64 {
        frobenius(&self.w.view())
    }

    fn check_input(&self, x: &ArrayView1<f64>) -> Result<()> {
        if x.len() != self.d_in() {
            return config(format!("input has length {}, expected {}", x.len(), self.d_in()));
        }
        Ok(())
    }

    fn check_output(&self, y: &ArrayView1<f64>) -> Result<()> {
        if y.len() != self.d_out() {
            return config(format!("target has length {}, expected {}", y.len(), self.d_out()));
        }
        Ok(())
    }
}

pub fn frobenius(m: &ArrayView2<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn euclid(v: &ArrayView1<f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn forward(x: ArrayView1<f64>, p: &ParamState, a: ActivationKind) -> Result<Array1<f64>> {
    p.check_input(&x)?;
    let hidden = p.v.t().dot(&x).mapv_into(|u| a.eval(u));
    Ok(p.w.t().dot(&hidden))
}

/// Row-wise forward pass over an `n × d_in` input block.
pub fn forward_batch(xs: ArrayView2<f64>, p: &ParamState, a: ActivationKind) -> Result<Array2<f64>> {
    if xs.ncols() != p.d_in() {
        return config(format!("inputs have {} columns, expected {}", xs.ncols(), p.d_in()));
    }
    let hidden = xs.dot(&p.v).mapv_into(|u| a.eval(u));
    Ok(hidden.dot(&p.w))
}

pub fn loss(y1: ArrayView1<f64>, y2: ArrayView1<f64>, k: LossKind) -> f64 {
    let r = residual_norm(y1, y2);
    k.of_norm(r)
}

/// Per-row losses between two `n × d_out` blocks.
pub fn losses_rows(y1: ArrayView2<f64>, y2: ArrayView2<f64>, k: LossKind) -> Vec<f64> {
    y1.axis_iter(Axis(0))
        .zip(y2.axis_iter(Axis(0)))
        .map(|(a, b)| loss(a, b, k))
        .collect()
}

fn residual_norm(y1: ArrayView1<f64>, y2: ArrayView1<f64>) -> f64 {
    y1.iter()
        .zip(y2.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// `(∇_{y₁} l, ∇_{y₂} l)`; at the L¹ kink both are zero.
pub fn loss_grad(y1: ArrayView1<f64>, y2: ArrayView1<f64>, k: LossKind) -> (Array1<f64>, Array1<f64>) {
    let r = &y1 - &y2;
    let s = k.grad_scale(euclid(&r.view()));
    let g1 = r * s;
    let g2 = -&g1;
    (g1, g2)
}

/// `l(f(x), y) + (λ/2)(‖V‖²_F + ‖W‖²_F)`.
pub fn reg_loss(
    x: ArrayView1<f64>,
    y: ArrayView1<f64>,
    p: &ParamState,
    lambda: f64,
    a: ActivationKind,
    k: LossKind,
) -> Result<f64> {
    p.check_output(&y)?;
    let out = forward(x, p, a)?;
    Ok(loss(out.view(), y, k) + 0.5 * lambda * regularizer(p))
}

/// `‖V‖²_F + ‖W‖²_F`.
pub fn regularizer(p: &ParamState) -> f64 {
    p.v.iter().chain(p.w.iter()).map(|x| x * x).sum()
}

struct SampleTerms {
    pre: Array1<f64>,
    hidden: Array1<f64>,
    g: Array1<f64>,
}

fn sample_terms(
    x: ArrayView1<f64>,
    y: ArrayView1<f64>,
    p: &ParamState,
    a: ActivationKind,
    k: LossKind,
) -> Result<SampleTerms> {
    p.check_input(&x)?;
    p.check_output(&y)?;
    let pre = p.v.t().dot(&x);
    let hidden = pre.mapv(|u| a.eval(u));
    let out = p.w.t().dot(&hidden);
    let (g, _) = loss_grad(out.view(), y, k);
    Ok(SampleTerms { pre, hidden, g })
}

/// `∇_v ℓ_λ = x ((∇_{y₁}l)ᵀ wᵀ Σ) + λ v`.
pub fn grad_v(
    x: ArrayView1<f64>,
    y: ArrayView1<f64>,
    p: &ParamState,
    lambda: f64,
    a: ActivationKind,
    k: LossKind,
) -> Result<Array2<f64>> {
    let t = sample_terms(x, y, p, a, k)?;
    // row vector gᵀwᵀΣ, length d
    let mut row = p.w.dot(&t.g);
    Zip::from(&mut row).and(&t.pre).for_each(|r, &u| *r *= a.derivative(u));
    let mut out = &p.v * lambda;
    Zip::from(out.rows_mut()).and(&x).for_each(|mut orow, &xi| {
        orow.scaled_add(xi, &row);
    });
    Ok(out)
}

/// `∇_w ℓ_λ = σ(vᵀx)(∇_{y₁}l)ᵀ + λ w`.
pub fn grad_w(
    x: ArrayView1<f64>,
    y: ArrayView1<f64>,
    p: &ParamState,
    lambda: f64,
    a: ActivationKind,
    k: LossKind,
) -> Result<Array2<f64>> {
    let t = sample_terms(x, y, p, a, k)?;
    let mut out = &p.w * lambda;
    Zip::from(out.rows_mut()).and(&t.hidden).for_each(|mut orow, &h| {
        orow.scaled_add(h, &t.g);
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::{array, Array};

    use crate::rng::Stream;

    fn random_state(s: &mut Stream, d_in: usize, d: usize, d_out: usize, scale: f64) -> ParamState {
        let v = Array::from_shape_fn((d_in, d), |_| scale * s.gaussian());
        let w = Array::from_shape_fn((d, d_out), |_| scale * s.gaussian());
        ParamState::new(v, w).unwrap()
    }

    fn random_vec(s: &mut Stream, n: usize) -> Array1<f64> {
        Array::from_shape_fn(n, |_| s.gaussian())
    }

    #[test]
    fn activations_vanish_at_zero_and_are_contractive() {
        let mut s = Stream::new(11);
        for a in ActivationKind::ALL {
            assert_eq!(a.eval(0.0), 0.0, "{a}");
            for _ in 0..2000 {
                let x = 6.0 * s.gaussian();
                let y = 6.0 * s.gaussian();
                assert!((a.eval(x) - a.eval(y)).abs() <= (x - y).abs() + 1e-15, "{a}");
                assert!(a.derivative(x).abs() <= 1.0, "{a}");
            }
        }
    }

    #[test]
    fn activation_derivative_matches_differences() {
        for a in [ActivationKind::Softplus, ActivationKind::Tanh, ActivationKind::SigmoidShifted] {
            for &x in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
                let h = 1e-6;
                let fd = (a.eval(x + h) - a.eval(x - h)) / (2.0 * h);
                assert_relative_eq!(a.derivative(x), fd, epsilon = 1e-8);
            }
        }
        assert_eq!(ActivationKind::Relu.derivative(0.0), 0.0);
    }

    #[test]
    fn forward_examples() {
        let p = ParamState::new(array![[1.0]], array![[2.0]]).unwrap();
        let out = forward(array![0.5].view(), &p, ActivationKind::Tanh).unwrap();
        assert_relative_eq!(out[0], 0.924_234_314_520_019_5, epsilon = 1e-15);

        let p = ParamState::new(Array2::eye(2), array![[1.0], [1.0]]).unwrap();
        let out = forward(array![1.0, -1.0].view(), &p, ActivationKind::Relu).unwrap();
        assert_eq!(out[0], 1.0);

        let mut s = Stream::new(2);
        let p = random_state(&mut s, 3, 5, 2, 1.0);
        for a in ActivationKind::ALL {
            let out = forward(Array1::zeros(3).view(), &p, a).unwrap();
            assert!(out.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn forward_rejects_bad_shapes() {
        let p = ParamState::zeros(3, 4, 1);
        assert!(matches!(
            forward(Array1::zeros(2).view(), &p, ActivationKind::Tanh),
            Err(Error::Config(_))
        ));
        assert!(ParamState::new(Array2::zeros((3, 4)), Array2::zeros((5, 1))).is_err());
        assert!(ParamState::new(array![[f64::NAN]], array![[1.0]]).is_err());
    }

    #[test]
    fn forward_batch_matches_rows() {
        let mut s = Stream::new(5);
        let p = random_state(&mut s, 4, 6, 2, 0.8);
        let xs = Array::from_shape_fn((7, 4), |_| s.gaussian());
        let batch = forward_batch(xs.view(), &p, ActivationKind::Softplus).unwrap();
        for (i, row) in xs.axis_iter(Axis(0)).enumerate() {
            let single = forward(row, &p, ActivationKind::Softplus).unwrap();
            for j in 0..2 {
                assert_relative_eq!(batch[[i, j]], single[j], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn loss_examples() {
        let y = array![0.3, -0.2];
        assert_eq!(loss(y.view(), y.view(), LossKind::L1Euclidean), 0.0);
        assert_eq!(loss(y.view(), y.view(), LossKind::Huber { delta: 0.5 }), 0.0);
        assert_eq!(loss(array![3.0, 4.0].view(), array![0.0, 0.0].view(), LossKind::L1Euclidean), 5.0);
        assert_eq!(loss(array![0.5].view(), array![0.0].view(), LossKind::Huber { delta: 1.0 }), 0.125);
        assert_eq!(loss(array![3.0].view(), array![0.0].view(), LossKind::Huber { delta: 1.0 }), 2.5);
    }

    #[test]
    fn loss_grad_examples() {
        let y = array![0.3, -0.2];
        let (g1, g2) = loss_grad(y.view(), y.view(), LossKind::L1Euclidean);
        assert!(g1.iter().chain(g2.iter()).all(|&v| v == 0.0));

        let (g1, g2) = loss_grad(array![1.0, 0.0].view(), array![0.0, 0.0].view(), LossKind::L1Euclidean);
        assert_eq!(g1, array![1.0, 0.0]);
        assert_eq!(g2, array![-1.0, 0.0]);

        let (g1, _) = loss_grad(array![3.0].view(), array![0.0].view(), LossKind::Huber { delta: 1.0 });
        assert_eq!(g1, array![1.0]);
    }

    #[test]
    fn losses_are_lipschitz_with_bounded_gradients() {
        let mut s = Stream::new(8);
        for k in [LossKind::L1Euclidean, LossKind::Huber { delta: 1.0 }, LossKind::Huber { delta: 0.3 }] {
            for _ in 0..1000 {
                let (a, b, a2, b2) = (random_vec(&mut s, 3), random_vec(&mut s, 3), random_vec(&mut s, 3), random_vec(&mut s, 3));
                let lhs = (loss(a.view(), b.view(), k) - loss(a2.view(), b2.view(), k)).abs();
                let rhs = euclid(&(&a - &a2).view()) + euclid(&(&b - &b2).view());
                assert!(lhs <= rhs + 1e-12);
                let (g1, g2) = loss_grad(a.view(), b.view(), k);
                assert!(euclid(&g1.view()) <= 1.0 + 1e-12);
                assert!(euclid(&g2.view()) <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn loss_parsing() {
        assert_eq!("l1".parse::<LossKind>().unwrap(), LossKind::L1Euclidean);
        assert_eq!("huber:0.5".parse::<LossKind>().unwrap(), LossKind::Huber { delta: 0.5 });
        assert!("huber:2".parse::<LossKind>().is_err());
        assert!("mse".parse::<LossKind>().is_err());
        assert_eq!("sigmoid-shifted".parse::<ActivationKind>().unwrap(), ActivationKind::SigmoidShifted);
    }

    #[test]
    fn reg_loss_examples() {
        let p = ParamState::zeros(3, 4, 1);
        let v = reg_loss(array![0.1, 0.2, 0.3].view(), array![0.0].view(), &p, 0.1, ActivationKind::Tanh, LossKind::L1Euclidean)
            .unwrap();
        assert_eq!(v, 0.0);

        // ‖V‖² = 4, ‖W‖² = 1, zero input so the data term vanishes against y = 0
        let p = ParamState::new(array![[2.0]], array![[1.0]]).unwrap();
        let v = reg_loss(array![0.0].view(), array![0.0].view(), &p, 0.1, ActivationKind::Tanh, LossKind::L1Euclidean)
            .unwrap();
        assert_relative_eq!(v, 0.25, epsilon = 1e-15);

        let p = ParamState::new(array![[1.0]], array![[2.0]]).unwrap();
        let v = reg_loss(array![0.5].view(), array![1.0].view(), &p, 0.1, ActivationKind::Tanh, LossKind::L1Euclidean)
            .unwrap();
        assert_relative_eq!(v, 0.325_765_685_479_980_5, epsilon = 1e-14);
    }

    #[test]
    fn gradients_reduce_to_weight_decay() {
        let mut s = Stream::new(21);
        let p = random_state(&mut s, 3, 5, 2, 1.0);
        let lambda = 0.3;
        for a in ActivationKind::ALL {
            let zero = Array1::zeros(3);
            let y = random_vec(&mut s, 2);
            let gv = grad_v(zero.view(), y.view(), &p, lambda, a, LossKind::L1Euclidean).unwrap();
            let gw = grad_w(zero.view(), y.view(), &p, lambda, a, LossKind::L1Euclidean).unwrap();
            assert_eq!(gv, &p.v * lambda);
            assert_eq!(gw, &p.w * lambda);

            let x = random_vec(&mut s, 3);
            let fit = forward(x.view(), &p, a).unwrap();
            let gv = grad_v(x.view(), fit.view(), &p, lambda, a, LossKind::L1Euclidean).unwrap();
            let gw = grad_w(x.view(), fit.view(), &p, lambda, a, LossKind::L1Euclidean).unwrap();
            assert_eq!(gv, &p.v * lambda);
            assert_eq!(gw, &p.w * lambda);
        }
    }

    fn fd_grads(x: &Array1<f64>, y: &Array1<f64>, p: &ParamState, lambda: f64, a: ActivationKind, k: LossKind) -> (Array2<f64>, Array2<f64>) {
        let h = 1e-5;
        let f = |q: &ParamState| reg_loss(x.view(), y.view(), q, lambda, a, k).unwrap();
        let mut gv = Array2::zeros(p.v.raw_dim());
        for idx in ndarray::indices(p.v.raw_dim()) {
            let (mut up, mut dn) = (p.clone(), p.clone());
            up.v[idx] += h;
            dn.v[idx] -= h;
            gv[idx] = (f(&up) - f(&dn)) / (2.0 * h);
        }
        let mut gw = Array2::zeros(p.w.raw_dim());
        for idx in ndarray::indices(p.w.raw_dim()) {
            let (mut up, mut dn) = (p.clone(), p.clone());
            up.w[idx] += h;
            dn.w[idx] -= h;
            gw[idx] = (f(&up) - f(&dn)) / (2.0 * h);
        }
        (gv, gw)
    }

    fn rel_err(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        frobenius(&(a - b).view()) / frobenius(&a.view()).max(frobenius(&b.view())).max(1e-12)
    }

    #[test]
    fn scalar_gradients_match_finite_differences() {
        let mut s = Stream::new(99);
        for (a, k) in [
            (ActivationKind::Softplus, LossKind::Huber { delta: 1.0 }),
            (ActivationKind::Tanh, LossKind::Huber { delta: 1.0 }),
            (ActivationKind::Softplus, LossKind::L1Euclidean),
            (ActivationKind::Tanh, LossKind::L1Euclidean),
        ] {
            for _ in 0..20 {
                let p = random_state(&mut s, 1, 1, 1, 1.0);
                let x = random_vec(&mut s, 1);
                let y = random_vec(&mut s, 1);
                let (fv, fw) = fd_grads(&x, &y, &p, 0.1, a, k);
                let gv = grad_v(x.view(), y.view(), &p, 0.1, a, k).unwrap();
                let gw = grad_w(x.view(), y.view(), &p, 0.1, a, k).unwrap();
                assert!(rel_err(&gv, &fv) < 1e-6, "{a} {k}: {gv} vs {fv}");
                assert!(rel_err(&gw, &fw) < 1e-6, "{a} {k}: {gw} vs {fw}");
            }
        }
    }

    #[test]
    fn matrix_gradients_match_finite_differences() {
        let mut s = Stream::new(1234);
        for a in [ActivationKind::Softplus, ActivationKind::Tanh, ActivationKind::SigmoidShifted] {
            for _ in 0..40 {
                let p = random_state(&mut s, 3, 4, 2, 0.7);
                let x = random_vec(&mut s, 3);
                let y = random_vec(&mut s, 2);
                let k = LossKind::Huber { delta: 1.0 };
                let (fv, fw) = fd_grads(&x, &y, &p, 0.1, a, k);
                let gv = grad_v(x.view(), y.view(), &p, 0.1, a, k).unwrap();
                let gw = grad_w(x.view(), y.view(), &p, 0.1, a, k).unwrap();
                assert!(rel_err(&gv, &fv) <= 1e-5);
                assert!(rel_err(&gw, &fw) <= 1e-5);
            }
        }
    }

    #[test]
    fn per_sample_gradient_bounds() {
        let mut s = Stream::new(77);
        let lambda = 0.2;
        for a in ActivationKind::ALL {
            for k in [LossKind::L1Euclidean, LossKind::Huber { delta: 0.7 }] {
                for _ in 0..200 {
                    let p = random_state(&mut s, 4, 6, 2, 1.0);
                    let x = random_vec(&mut s, 4);
                    let y = random_vec(&mut s, 2);
                    let gv = grad_v(x.view(), y.view(), &p, lambda, a, k).unwrap();
                    let gw = grad_w(x.view(), y.view(), &p, lambda, a, k).unwrap();
                    let xn = euclid(&x.view());
                    let dv = frobenius(&(&gv - &(&p.v * lambda)).view());
                    let dw = frobenius(&(&gw - &(&p.w * lambda)).view());
                    let hidden = p.v.t().dot(&x).mapv(|u| a.eval(u));
                    let hn = euclid(&hidden.view());
                    assert!(dv <= xn * p.w_norm() * (1.0 + 1e-12));
                    assert!(dw <= hn * (1.0 + 1e-12) + 1e-15);
                    assert!(hn <= xn * p.v_norm() * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn composed_loss_is_lipschitz_in_data() {
        let mut s = Stream::new(31);
        for a in ActivationKind::ALL {
            for k in [LossKind::L1Euclidean, LossKind::Huber { delta: 1.0 }] {
                for _ in 0..300 {
                    let p = random_state(&mut s, 3, 5, 2, 0.9);
                    let (x, x2) = (random_vec(&mut s, 3), random_vec(&mut s, 3));
                    let (y, y2) = (random_vec(&mut s, 2), random_vec(&mut s, 2));
                    let l1 = loss(forward(x.view(), &p, a).unwrap().view(), y.view(), k);
                    let l2 = loss(forward(x2.view(), &p, a).unwrap().view(), y2.view(), k);
                    let rhs = p.v_norm() * p.w_norm() * euclid(&(&x - &x2).view()) + euclid(&(&y - &y2).view());
                    assert!((l1 - l2).abs() <= rhs * (1.0 + 1e-12) + 1e-14);
                }
            }
        }
    }
}
