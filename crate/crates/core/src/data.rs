//! The synthetic distribution ρ: X uniform on the unit sphere of ℝ^{d_in},
//! `Y = clip(βᵀX + ε)` with ε ~ N(0, σ²I) drawn per sample. For `d_out = 1`
//! the clip is `max(min(·, 1), −1)`; for `d_out > 1` it is the radial
//! projection onto the unit ball, so `|Y| ≤ 1` holds in every dimension.
//! Also support checks and empirical measures.

use std::io::{BufRead, Write};

use ndarray::{s, Array1, Array2, ArrayView1, ArrayViewMut1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{config, usage, Error, Result};
use crate::model::euclid;
use crate::numfmt::sig17;
use crate::rng::Stream;

/// Parameters of ρ. `beta` is `d_in × d_out` with unit-norm columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub beta: Array2<f64>,
    pub noise_std: f64,
    /// Radius of the symmetric clip region for the outputs.
    pub clip: f64,
    /// Seed β was drawn from, if it was drawn.
    pub beta_seed: Option<u64>,
}

impl DataSpec {
    /// β drawn column-wise uniformly on the sphere from `beta_seed`.
    pub fn seeded(d_in: usize, d_out: usize, noise_std: f64, beta_seed: u64) -> Result<Self> {
        if d_in == 0 || d_out == 0 {
            return config("data dimensions must be positive");
        }
        let cols = sample_sphere(d_in, d_out, beta_seed)?;
        let spec = Self {
            beta: cols.reversed_axes(),
            noise_std,
            clip: 1.0,
            beta_seed: Some(beta_seed),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_beta(beta: Array2<f64>, noise_std: f64) -> Result<Self> {
        let spec = Self {
            beta,
            noise_std,
            clip: 1.0,
            beta_seed: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn d_in(&self) -> usize {
        self.beta.nrows()
    }

    pub fn d_out(&self) -> usize {
        self.beta.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.is_empty() {
            return config("beta must be non-empty");
        }
        for (j, col) in self.beta.axis_iter(Axis(1)).enumerate() {
            let n = euclid(&col);
            if (n - 1.0).abs() > 1e-12 {
                return config(format!("beta column {j} has norm {n}, expected 1"));
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return config(format!("noise std must be finite and nonnegative, got {}", self.noise_std));
        }
        if !(self.clip > 0.0) {
            return config("clip half-width must be positive");
        }
        Ok(())
    }

    /// Draws one pair into `x` and `y` from `s`.
    pub fn draw_into(&self, s: &mut Stream, mut x: ArrayViewMut1<f64>, mut y: ArrayViewMut1<f64>) {
        unit_vector_into(s, x.as_slice_mut().expect("contiguous row"));
        for (j, yj) in y.iter_mut().enumerate() {
            let signal: f64 = self.beta.column(j).dot(&x);
            *yj = signal + self.noise_std * s.gaussian();
        }
        if y.len() == 1 {
            y[0] = y[0].clamp(-self.clip, self.clip);
        } else {
            let norm = euclid(&y.view());
            if norm > self.clip {
                y.mapv_inplace(|v| v * self.clip / norm);
            }
        }
    }
}

fn unit_vector_into(s: &mut Stream, out: &mut [f64]) {
    loop {
        s.fill_gaussian(out, 1.0);
        let n = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            out.iter_mut().for_each(|v| *v /= n);
            return;
        }
    }
}

/// `count` i.i.d. uniform points on `S^{dim−1}`, one per row.
pub fn sample_sphere(dim: usize, count: usize, seed: u64) -> Result<Array2<f64>> {
    if dim == 0 {
        return usage("sphere dimension must be at least 1");
    }
    let mut s = Stream::new(seed);
    let mut out = Array2::zeros((count, dim));
    for mut row in out.rows_mut() {
        unit_vector_into(&mut s, row.as_slice_mut().expect("standard layout"));
    }
    Ok(out)
}

/// `n` pairs, inputs in `xs` (n × d_in) and outputs in `ys` (n × d_out).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub xs: Array2<f64>,
    pub ys: Array2<f64>,
}

impl Dataset {
    pub fn new(xs: Array2<f64>, ys: Array2<f64>) -> Result<Self> {
        if xs.nrows() != ys.nrows() {
            return config(format!("{} inputs but {} outputs", xs.nrows(), ys.nrows()));
        }
        Ok(Self { xs, ys })
    }

    pub fn len(&self) -> usize {
        self.xs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.nrows() == 0
    }

    pub fn d_in(&self) -> usize {
        self.xs.ncols()
    }

    pub fn d_out(&self) -> usize {
        self.ys.ncols()
    }

    pub fn pair(&self, i: usize) -> (ArrayView1<'_, f64>, ArrayView1<'_, f64>) {
        (self.xs.row(i), self.ys.row(i))
    }

    /// Rows selected by `idx`, in order (repeats allowed).
    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            xs: self.xs.select(Axis(0), idx),
            ys: self.ys.select(Axis(0), idx),
        }
    }

    /// Headerless CSV: x coordinates then y coordinates, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for i in 0..self.len() {
            let fields: Vec<String> = self.xs.row(i).iter().chain(self.ys.row(i).iter()).map(|&v| sig17(v)).collect();
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R, d_in: usize) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::Usage(format!("reading dataset: {e}")))?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Usage(format!("line {}: {e}", lineno + 1)))?;
            if row.len() <= d_in {
                return usage(format!("line {}: {} fields, need more than d_in = {d_in}", lineno + 1, row.len()));
            }
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return usage(format!("line {}: ragged row", lineno + 1));
                }
            }
            rows.push(row);
        }
        let width = rows.first().map_or(d_in + 1, Vec::len);
        let n = rows.len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let all = Array2::from_shape_vec((n, width), flat).map_err(|e| Error::Usage(e.to_string()))?;
        Dataset::new(all.slice(s![.., ..d_in]).to_owned(), all.slice(s![.., d_in..]).to_owned())
    }
}

/// `n` i.i.d. draws from ρ.
pub fn sample_rho(spec: &DataSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return usage("sample size must be at least 1");
    }
    let mut s = Stream::new(seed);
    let mut xs = Array2::zeros((n, spec.d_in()));
    let mut ys = Array2::zeros((n, spec.d_out()));
    for (x, y) in xs.rows_mut().into_iter().zip(ys.rows_mut()) {
        spec.draw_into(&mut s, x, y);
    }
    Dataset::new(xs, ys)
}

/// Atomic probability measure: one point per row, nonnegative weights summing to 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub points: Array2<f64>,
    pub weights: Array1<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Array2<f64>, weights: Array1<f64>) -> Result<Self> {
        let m = Self { points, weights };
        m.validate()?;
        Ok(m)
    }

    pub fn uniform(points: Array2<f64>) -> Result<Self> {
        let n = points.nrows();
        if n == 0 {
            return usage("measure needs at least one atom");
        }
        Self::new(points, Array1::from_elem(n, 1.0 / n as f64))
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.nrows() == 0 {
            return usage("measure needs at least one atom");
        }
        if self.points.nrows() != self.weights.len() {
            return usage(format!("{} atoms but {} weights", self.points.nrows(), self.weights.len()));
        }
        if self.weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return usage("weights must be finite and nonnegative");
        }
        let total: f64 = self.weights.sum();
        if (total - 1.0).abs() > 1e-12 {
            return usage(format!("weights sum to {total}, expected 1"));
        }
        if self.points.iter().any(|v| !v.is_finite()) {
            return usage("atoms must have finite coordinates");
        }
        Ok(())
    }
}

/// Uniform measure on the concatenated pairs `(xᵢ, yᵢ)`.
pub fn empirical_measure(ds: &Dataset) -> Result<DiscreteMeasure> {
    if ds.is_empty() {
        return usage("empirical measure of an empty dataset");
    }
    let points = ndarray::concatenate(Axis(1), &[ds.xs.view(), ds.ys.view()]).map_err(|e| Error::Usage(e.to_string()))?;
    DiscreteMeasure::uniform(points)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub radius: f64,
    /// Indices `i` with `max(|xᵢ|, |yᵢ|) > radius`.
    pub violations: Vec<usize>,
}

impl SupportReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Rounding slack for points normalized onto the sphere.
const SUPPORT_SLACK: f64 = 1e-12;

pub fn check_support(ds: &Dataset, radius: f64) -> SupportReport {
    let violations = (0..ds.len())
        .filter(|&i| {
            let (x, y) = ds.pair(i);
            euclid(&x).max(euclid(&y)) > radius + SUPPORT_SLACK
        })
        .collect();
    SupportReport { radius, violations }
}
