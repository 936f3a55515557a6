//! Exact optimal transport between discrete measures and empirical
//! calibration of the empirical-measure convergence rate.
//!
//! [`transport_exact`] solves the transportation problem as a minimum-cost
//! flow with successive shortest paths. Ground costs are scaled by `10⁹` and
//! rounded to integers so reduced costs stay exact and the result does not
//! depend on floating-point tie-breaking; masses stay real-valued.
//!
//! The distance `W₁(ρ, ρ̃_n)` to an unknown continuous `ρ` is replaced by
//! `W₁(ρ̃_m, ρ̃_n)` against an independent reference sample of size `m`.
//! This proxy is biased upward (the reference sample carries its own
//! sampling error), so constants calibrated from it are conservative.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::{sample_rho, DataSpec, DiscreteMeasure};
use crate::error::{usage, Result};
use crate::rng::{derive_seed, label, Stream};

/// Ground costs are stored as `round(cost · COST_SCALE)`.
pub const COST_SCALE: f64 = 1e9;

/// Residual supply or demand below this is treated as exhausted.
const MASS_EPS: f64 = 1e-14;

/// Sparse coupling between two discrete measures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub source_len: usize,
    pub target_len: usize,
    /// `(i, j, f_ij)` with `i` indexing the first measure and `j` the second.
    pub flows: Vec<(usize, usize, f64)>,
    /// `Σ f_ij c(z_i, z_j)` evaluated with unrounded costs.
    pub cost: f64,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.source_len];
        for &(i, _, f) in &self.flows {
            r[i] += f;
        }
        r
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.target_len];
        for &(_, j, f) in &self.flows {
            c[j] += f;
        }
        c
    }

    /// Largest absolute deviation of either marginal from the given weights.
    pub fn marginal_error(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        let rows = self.row_sums().into_iter().zip(mu.weights.iter()).map(|(a, b)| (a - b).abs());
        let cols = self.col_sums().into_iter().zip(nu.weights.iter()).map(|(a, b)| (a - b).abs());
        rows.chain(cols).fold(0.0, f64::max)
    }
}

fn ground_cost(a: ArrayView1<f64>, b: ArrayView1<f64>, exponent: f64) -> f64 {
    let d = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    if exponent == 1.0 {
        d
    } else {
        d.powf(exponent)
    }
}

/// `W₁(μ, ν)` under the Euclidean ground metric, with an optimal plan.
pub fn w1_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(f64, TransportPlan)> {
    transport_exact(mu, nu, 1.0)
}

/// Minimal `Σ f_ij |z_i − z_j|^q` over couplings of `μ` and `ν`.
pub fn transport_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure, exponent: f64) -> Result<(f64, TransportPlan)> {
    mu.validate()?;
    nu.validate()?;
    if mu.dim() != nu.dim() {
        return usage(format!("measures live in dimensions {} and {}", mu.dim(), nu.dim()));
    }
    if !(exponent >= 1.0 && exponent.is_finite()) {
        return usage(format!("cost exponent must be at least 1, got {exponent}"));
    }
    // the larger side supplies, the smaller side absorbs
    let swapped = nu.len() > mu.len();
    let (src, dst) = if swapped { (nu, mu) } else { (mu, nu) };
    let (ns, nt) = (src.len(), dst.len());

    let mut real = vec![0.0; ns * nt];
    let mut scaled = vec![0i64; ns * nt];
    for i in 0..ns {
        for j in 0..nt {
            let c = ground_cost(src.points.row(i), dst.points.row(j), exponent);
            let s = (c * COST_SCALE).round();
            if s >= i64::MAX as f64 / (ns + nt + 1) as f64 {
                return usage(format!("ground cost {c} too large for integer scaling"));
            }
            real[i * nt + j] = c;
            scaled[i * nt + j] = s as i64;
        }
    }

    let by_sink = successive_shortest_paths(&src.weights.to_vec(), &dst.weights.to_vec(), &scaled);

    let mut flows = Vec::new();
    let mut cost = 0.0;
    for (j, arcs) in by_sink.iter().enumerate() {
        for &(i, f) in arcs {
            if f > 0.0 {
                cost += f * real[i * nt + j];
                flows.push(if swapped { (j, i, f) } else { (i, j, f) });
            }
        }
    }
    flows.sort_by_key(|a| (a.0, a.1));
    let plan = TransportPlan { source_len: mu.len(), target_len: nu.len(), flows, cost };
    Ok((cost, plan))
}

/// Returns, for each sink, the list of `(source, mass)` arcs carrying flow.
///
/// Each search is a Dijkstra run from one source with remaining supply over
/// reduced costs `c(u,v) + h(u) − h(v)`, stopped at the first sink with
/// remaining demand. Nodes settled before that sink get `h += d − D`.
fn successive_shortest_paths(supply: &[f64], demand: &[f64], cost: &[i64]) -> Vec<Vec<(usize, f64)>> {
    let (ns, nt) = (supply.len(), demand.len());
    let nodes = ns + nt;
    let mut excess = supply.to_vec();
    let mut deficit = demand.to_vec();
    let mut h = vec![0i64; nodes];
    let mut flows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nt];

    let mut dist = vec![i64::MAX; nodes];
    let mut pred = vec![usize::MAX; nodes];
    let mut done = vec![false; nodes];
    let mut touched: Vec<usize> = Vec::with_capacity(nodes);
    let mut settled: Vec<usize> = Vec::with_capacity(nodes);
    let mut heap = BinaryHeap::new();

    for s in 0..ns {
        while excess[s] > MASS_EPS {
            for &v in &touched {
                dist[v] = i64::MAX;
                pred[v] = usize::MAX;
                done[v] = false;
            }
            touched.clear();
            settled.clear();
            heap.clear();

            dist[s] = 0;
            touched.push(s);
            heap.push(Reverse((0i64, s)));
            let mut target = None;
            while let Some(Reverse((d, u))) = heap.pop() {
                if done[u] || d > dist[u] {
                    continue;
                }
                done[u] = true;
                settled.push(u);
                if u >= ns {
                    let j = u - ns;
                    if deficit[j] > MASS_EPS {
                        target = Some((u, d));
                        break;
                    }
                    for &(i, f) in &flows[j] {
                        if f <= 0.0 || done[i] {
                            continue;
                        }
                        let nd = d + (-cost[i * nt + j] + h[u] - h[i]);
                        if nd < dist[i] {
                            if dist[i] == i64::MAX {
                                touched.push(i);
                            }
                            dist[i] = nd;
                            pred[i] = u;
                            heap.push(Reverse((nd, i)));
                        }
                    }
                } else {
                    let row = &cost[u * nt..(u + 1) * nt];
                    let hu = h[u];
                    for (j, &c) in row.iter().enumerate() {
                        let v = ns + j;
                        if done[v] {
                            continue;
                        }
                        let nd = d + c + hu - h[v];
                        if nd < dist[v] {
                            if dist[v] == i64::MAX {
                                touched.push(v);
                            }
                            dist[v] = nd;
                            pred[v] = u;
                            heap.push(Reverse((nd, v)));
                        }
                    }
                }
            }
            let Some((t, big_d)) = target else {
                // supply left over only from rounding of the weight sums
                break;
            };
            for &v in &settled {
                h[v] += dist[v] - big_d;
            }

            let mut bottleneck = excess[s].min(deficit[t - ns]);
            let mut v = t;
            while v != s {
                let u = pred[v];
                if v < ns {
                    // backward arc: sink u returns mass to source v
                    let f = flow_of(&flows[u - ns], v);
                    bottleneck = bottleneck.min(f);
                }
                v = u;
            }
            let mut v = t;
            while v != s {
                let u = pred[v];
                if v >= ns {
                    add_flow(&mut flows[v - ns], u, bottleneck);
                } else {
                    add_flow(&mut flows[u - ns], v, -bottleneck);
                }
                v = u;
            }
            excess[s] -= bottleneck;
            deficit[t - ns] -= bottleneck;
        }
    }
    flows
}

fn flow_of(arcs: &[(usize, f64)], i: usize) -> f64 {
    arcs.iter().find(|a| a.0 == i).map_or(0.0, |a| a.1)
}

fn add_flow(arcs: &mut Vec<(usize, f64)>, i: usize, delta: f64) {
    if let Some(k) = arcs.iter().position(|a| a.0 == i) {
        arcs[k].1 += delta;
        if arcs[k].1 <= 0.0 {
            arcs.swap_remove(k);
        }
    } else {
        arcs.push((i, delta));
    }
}

/// Distribution sampled for rate calibration.
#[derive(Clone, Copy, Debug)]
pub enum PointSource<'a> {
    /// Pairs `(x, y)` from ρ, concatenated into `ℝ^{d_in + d_out}`.
    Rho(&'a DataSpec),
    /// Uniform on `[0, 1]^dim`.
    UnitCube { dim: usize },
}

impl PointSource<'_> {
    pub fn dim(&self) -> usize {
        match self {
            PointSource::Rho(spec) => spec.d_in() + spec.d_out(),
            PointSource::UnitCube { dim } => *dim,
        }
    }

    pub fn sample(&self, count: usize, seed: u64) -> Result<Array2<f64>> {
        if count == 0 {
            return usage("sample size must be at least 1");
        }
        match self {
            PointSource::Rho(spec) => {
                let ds = sample_rho(spec, count, seed)?;
                Ok(ndarray::concatenate(ndarray::Axis(1), &[ds.xs.view(), ds.ys.view()]).expect("row counts agree"))
            }
            PointSource::UnitCube { dim } => {
                if *dim == 0 {
                    return usage("cube dimension must be positive");
                }
                let mut s = Stream::new(seed);
                Ok(Array2::from_shape_simple_fn((count, *dim), || s.uniform()))
            }
        }
    }
}

/// `W₁` between an `n`-point and an `m`-point sample drawn with the given seeds.
pub fn w1_between_samples(source: PointSource, n: usize, seed_n: u64, m: usize, seed_m: u64) -> Result<f64> {
    let a = DiscreteMeasure::uniform(source.sample(n, seed_n)?)?;
    let b = DiscreteMeasure::uniform(source.sample(m, seed_m)?)?;
    Ok(w1_exact(&a, &b)?.0)
}

/// Upward-biased proxy for `W₁(ρ, ρ̃_n)`: the distance from an `n`-point
/// empirical measure to an independent `m`-point one.
pub fn w1_empirical_to_sample(source: PointSource, n: usize, m: usize, seed: u64) -> Result<f64> {
    w1_between_samples(
        source,
        n,
        derive_seed(seed, &[label::EMPIRICAL]),
        m,
        derive_seed(seed, &[label::REFERENCE]),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSample {
    pub n: usize,
    pub rep: usize,
    pub distance: f64,
}

/// Fitted convergence rate of the empirical measure.
///
/// `exponent` is the OLS slope of `log mean W₁` on `log n`. The constants fix
/// the slope at `−1/D` and fit only the level, so that
/// `mean W₁ ≈ √c_hat · n^{−1/D}` and `mean W₁² ≈ c_hat_sq · n^{−2/D}` hold in
/// the least-squares sense on the fitted range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub dimension: usize,
    pub ns: Vec<usize>,
    pub mean_w1: Vec<f64>,
    pub mean_w1_sq: Vec<f64>,
    pub exponent: f64,
    pub intercept: f64,
    pub c_hat: f64,
    pub c_hat_sq: f64,
    /// Reference-sample size as a multiple of `n`; 0 for fits from given means.
    pub reference_factor: usize,
    pub samples: Vec<RateSample>,
    pub warnings: Vec<String>,
}

impl RateFit {
    pub fn from_means(dimension: usize, ns: &[usize], mean_w1: &[f64], mean_w1_sq: &[f64]) -> Result<Self> {
        if ns.len() != mean_w1.len() || ns.len() != mean_w1_sq.len() {
            return usage("sample sizes and means differ in length");
        }
        if dimension == 0 {
            return usage("dimension must be positive");
        }
        let mut distinct = ns.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < 2 || distinct[0] == 0 {
            return usage("rate fit needs at least two distinct positive sample sizes");
        }
        if mean_w1.iter().chain(mean_w1_sq).any(|&v| !(v > 0.0 && v.is_finite())) {
            return usage("mean distances must be positive and finite");
        }
        let mut warnings = Vec::new();
        if dimension < 5 {
            warnings.push(format!("dimension {dimension} < 5: the n^(-1/D) rate is not the governing regime"));
        }
        if distinct.len() < 3 {
            warnings.push("fewer than three sample sizes".into());
        }
        let dd = dimension as f64;
        let lx: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
        let ly: Vec<f64> = mean_w1.iter().map(|v| v.ln()).collect();
        let k = lx.len() as f64;
        let mx = lx.iter().sum::<f64>() / k;
        let my = ly.iter().sum::<f64>() / k;
        let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
        let exponent = sxy / sxx;
        let intercept = my - exponent * mx;
        let level = lx.iter().zip(&ly).map(|(x, y)| y + x / dd).sum::<f64>() / k;
        let level_sq = lx.iter().zip(mean_w1_sq).map(|(x, y)| y.ln() + 2.0 * x / dd).sum::<f64>() / k;
        Ok(Self {
            dimension,
            ns: ns.to_vec(),
            mean_w1: mean_w1.to_vec(),
            mean_w1_sq: mean_w1_sq.to_vec(),
            exponent,
            intercept,
            c_hat: (2.0 * level).exp(),
            c_hat_sq: level_sq.exp(),
            reference_factor: 0,
            samples: Vec::new(),
            warnings,
        })
    }

    /// Fit from raw `(n, rep, distance)` samples, averaging per `n`.
    pub fn from_samples(dimension: usize, samples: Vec<RateSample>, reference_factor: usize) -> Result<Self> {
        let mut ns: Vec<usize> = samples.iter().map(|s| s.n).collect();
        ns.sort_unstable();
        ns.dedup();
        let mut m1 = Vec::with_capacity(ns.len());
        let mut m2 = Vec::with_capacity(ns.len());
        for &n in &ns {
            let ds: Vec<f64> = samples.iter().filter(|s| s.n == n).map(|s| s.distance).collect();
            let k = ds.len() as f64;
            m1.push(ds.iter().sum::<f64>() / k);
            m2.push(ds.iter().map(|d| d * d).sum::<f64>() / k);
        }
        let mut fit = Self::from_means(dimension, &ns, &m1, &m2)?;
        fit.reference_factor = reference_factor;
        fit.samples = samples;
        Ok(fit)
    }
}

/// Estimates the rate and constant from `reps` distances per sample size,
/// each measured against a fresh reference sample of `reference_factor · n` points.
pub fn fit_rate(source: PointSource, ns: &[usize], reps: usize, reference_factor: usize, seed: u64) -> Result<RateFit> {
    if reps == 0 || reference_factor == 0 {
        return usage("repetitions and reference factor must be positive");
    }
    let mut samples = Vec::with_capacity(ns.len() * reps);
    for &n in ns {
        for rep in 0..reps {
            let cell = derive_seed(seed, &[label::CELL, n as u64, rep as u64]);
            let distance = w1_empirical_to_sample(source, n, reference_factor * n, cell)?;
            samples.push(RateSample { n, rep, distance });
        }
    }
    RateFit::from_samples(source.dim(), samples, reference_factor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::{array, Array1};

    fn random_points(s: &mut Stream, n: usize, dim: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((n, dim), || s.gaussian())
    }

    fn random_weights(s: &mut Stream, n: usize) -> Array1<f64> {
        let raw: Vec<f64> = (0..n).map(|_| 0.05 + s.uniform()).collect();
        let total: f64 = raw.iter().sum();
        let mut w: Array1<f64> = raw.into_iter().map(|v| v / total).collect();
        let drift = 1.0 - w.sum();
        w[0] += drift;
        w
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

    fn brute_force(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        let n = a.nrows();
        permutations(n)
            .iter()
            .map(|p| (0..n).map(|i| ground_cost(a.row(i), b.row(p[i]), 1.0)).sum::<f64>() / n as f64)
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn trivial_cases() {
        let a = DiscreteMeasure::uniform(array![[0.0, 0.0, 0.0]]).unwrap();
        let b = DiscreteMeasure::uniform(array![[1.0, 2.0, 2.0]]).unwrap();
        assert_relative_eq!(w1_exact(&a, &b).unwrap().0, 3.0, max_relative = 1e-15);
        let mut s = Stream::new(1);
        let mu = DiscreteMeasure::new(random_points(&mut s, 7, 3), random_weights(&mut s, 7)).unwrap();
        let (d, plan) = w1_exact(&mu, &mu).unwrap();
        assert_eq!(d, 0.0);
        assert!(plan.marginal_error(&mu, &mu) < 1e-12);
    }

    #[test]
    fn matches_permutation_brute_force() {
        let mut s = Stream::new(7);
        for case in 0..50 {
            let n = 1 + case % 6;
            let dim = 1 + case % 4;
            let a = random_points(&mut s, n, dim);
            let b = random_points(&mut s, n, dim);
            let expected = brute_force(&a, &b);
            let (mu, nu) = (DiscreteMeasure::uniform(a).unwrap(), DiscreteMeasure::uniform(b).unwrap());
            let (d, plan) = w1_exact(&mu, &nu).unwrap();
            assert!((d - expected).abs() <= 1e-9, "case {case}: {d} vs {expected}");
            assert!(plan.marginal_error(&mu, &nu) <= 1e-9);
        }
    }

    #[test]
    fn five_points_in_three_dimensions() {
        let mut s = Stream::new(35);
        let a = random_points(&mut s, 5, 3);
        let b = random_points(&mut s, 5, 3);
        let expected = brute_force(&a, &b);
        let d = w1_exact(&DiscreteMeasure::uniform(a).unwrap(), &DiscreteMeasure::uniform(b).unwrap()).unwrap().0;
        assert!((d - expected).abs() <= 1e-9);
    }

    #[test]
    fn plan_is_consistent() {
        let mut s = Stream::new(11);
        for _ in 0..30 {
            let (n, m) = (1 + s.index(9), 1 + s.index(9));
            let mu = DiscreteMeasure::new(random_points(&mut s, n, 2), random_weights(&mut s, n)).unwrap();
            let nu = DiscreteMeasure::new(random_points(&mut s, m, 2), random_weights(&mut s, m)).unwrap();
            let (d, plan) = w1_exact(&mu, &nu).unwrap();
            assert!(plan.marginal_error(&mu, &nu) <= 1e-9);
            assert!(plan.flows.iter().all(|f| f.2 > 0.0));
            let recomputed: f64 = plan.flows.iter().map(|&(i, j, f)| f * ground_cost(mu.points.row(i), nu.points.row(j), 1.0)).sum();
            assert_relative_eq!(recomputed, d, max_relative = 1e-12);
            assert!(plan.flows.len() < n + m);
        }
    }

    #[test]
    fn metric_properties() {
        let mut s = Stream::new(12);
        for _ in 0..40 {
            let make = |s: &mut Stream| {
                let n = 1 + s.index(6);
                DiscreteMeasure::new(random_points(s, n, 3), random_weights(s, n)).unwrap()
            };
            let (a, b, c) = (make(&mut s), make(&mut s), make(&mut s));
            let ab = w1_exact(&a, &b).unwrap().0;
            let ba = w1_exact(&b, &a).unwrap().0;
            let bc = w1_exact(&b, &c).unwrap().0;
            let ac = w1_exact(&a, &c).unwrap().0;
            assert!((ab - ba).abs() <= 1e-9);
            assert!(ac <= ab + bc + 1e-9);
            assert!(ab > 0.0);
        }
    }

    #[test]
    fn zero_only_for_equal_measures() {
        let pts = array![[0.0, 1.0], [2.0, 0.5], [1.0, 1.0]];
        let a = DiscreteMeasure::new(pts.clone(), array![0.2, 0.3, 0.5]).unwrap();
        let permuted = DiscreteMeasure::new(array![[1.0, 1.0], [0.0, 1.0], [2.0, 0.5]], array![0.5, 0.2, 0.3]).unwrap();
        assert!(w1_exact(&a, &permuted).unwrap().0 < 1e-12);
        let reweighted = DiscreteMeasure::new(pts, array![0.3, 0.2, 0.5]).unwrap();
        assert!(w1_exact(&a, &reweighted).unwrap().0 > 0.01);
    }

    #[test]
    fn kantorovich_rubinstein_lower_bounds() {
        let mut s = Stream::new(13);
        for _ in 0..30 {
            let (n, m) = (1 + s.index(8), 1 + s.index(8));
            let mu = DiscreteMeasure::new(random_points(&mut s, n, 3), random_weights(&mut s, n)).unwrap();
            let nu = DiscreteMeasure::new(random_points(&mut s, m, 3), random_weights(&mut s, m)).unwrap();
            let w = w1_exact(&mu, &nu).unwrap().0;
            let integral = |m: &DiscreteMeasure, h: &dyn Fn(ArrayView1<f64>) -> f64| {
                m.points.rows().into_iter().zip(m.weights.iter()).map(|(p, w)| w * h(p)).sum::<f64>()
            };
            let mut tests: Vec<Box<dyn Fn(ArrayView1<f64>) -> f64>> = Vec::new();
            for k in 0..3 {
                tests.push(Box::new(move |p: ArrayView1<f64>| p[k]));
                tests.push(Box::new(move |p: ArrayView1<f64>| -p[k]));
            }
            for _ in 0..4 {
                let anchor = Array1::from_shape_simple_fn(3, || s.gaussian());
                tests.push(Box::new(move |p: ArrayView1<f64>| ground_cost(p, anchor.view(), 1.0)));
            }
            for h in &tests {
                assert!(integral(&mu, h.as_ref()) - integral(&nu, h.as_ref()) <= w + 1e-9);
            }
        }
    }

    #[test]
    fn unequal_sizes_and_exponent() {
        let a = DiscreteMeasure::uniform(array![[0.0], [1.0]]).unwrap();
        let b = DiscreteMeasure::uniform(array![[0.0], [0.0], [3.0], [3.0]]).unwrap();
        assert_relative_eq!(w1_exact(&a, &b).unwrap().0, 1.0, max_relative = 1e-12);
        assert_relative_eq!(transport_exact(&a, &b, 2.0).unwrap().0, 2.0, max_relative = 1e-12);
        assert!(transport_exact(&a, &b, 0.5).is_err());
    }

    #[test]
    fn unnormalized_weights_rejected() {
        let pts = array![[0.0], [1.0]];
        let bad = DiscreteMeasure { points: pts.clone(), weights: array![0.5, 0.6] };
        let good = DiscreteMeasure::uniform(pts).unwrap();
        assert!(matches!(w1_exact(&bad, &good), Err(crate::Error::Usage(_))));
    }

    #[test]
    fn sample_distances() {
        let cube = PointSource::UnitCube { dim: 5 };
        let a = cube.sample(1, 3).unwrap();
        let b = cube.sample(1, 4).unwrap();
        let direct = ground_cost(a.row(0), b.row(0), 1.0);
        assert_relative_eq!(w1_between_samples(cube, 1, 3, 1, 4).unwrap(), direct, max_relative = 1e-12);
        assert_eq!(w1_between_samples(cube, 20, 9, 20, 9).unwrap(), 0.0);

        let spec = DataSpec::seeded(4, 1, 0.1, 2).unwrap();
        let rho = PointSource::Rho(&spec);
        assert_eq!(rho.dim(), 5);
        assert!(w1_empirical_to_sample(rho, 8, 32, 1).unwrap() > 0.0);
    }

    #[test]
    fn cube_distances_decrease_on_average() {
        let cube = PointSource::UnitCube { dim: 5 };
        let mean = |n: usize| (0..8).map(|r| w1_empirical_to_sample(cube, n, 512, r).unwrap()).sum::<f64>() / 8.0;
        let (small, large) = (mean(8), mean(32));
        assert!(small > 0.0 && large > 0.0);
        assert!(large < small);
    }

    #[test]
    fn rate_fit_on_exact_power_law() {
        let ns = [10, 20, 40, 80, 160];
        let m1: Vec<f64> = ns.iter().map(|&n| 0.7 * (n as f64).powf(-0.2)).collect();
        let m2: Vec<f64> = m1.iter().map(|v| v * v).collect();
        let fit = RateFit::from_means(5, &ns, &m1, &m2).unwrap();
        assert!((fit.exponent + 0.2).abs() <= 1e-12);
        assert_relative_eq!(fit.c_hat, 0.49, max_relative = 1e-12);
        assert_relative_eq!(fit.c_hat_sq, 0.49, max_relative = 1e-12);

        let doubled: Vec<f64> = m1.iter().map(|v| 2.0 * v).collect();
        let doubled_sq: Vec<f64> = m2.iter().map(|v| 4.0 * v).collect();
        let fit2 = RateFit::from_means(5, &ns, &doubled, &doubled_sq).unwrap();
        assert!((fit2.exponent - fit.exponent).abs() <= 1e-12);
        assert_relative_eq!(fit2.c_hat, 4.0 * fit.c_hat, max_relative = 1e-12);
        assert_relative_eq!(fit2.c_hat_sq, 4.0 * fit.c_hat_sq, max_relative = 1e-12);

        assert!(RateFit::from_means(5, &[10, 10], &[1.0, 1.0], &[1.0, 1.0]).is_err());
        assert!(!RateFit::from_means(3, &ns, &m1, &m2).unwrap().warnings.is_empty());
    }
}
