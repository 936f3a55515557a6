//! Experiment configuration and the two built-in presets.

use std::path::{Path, PathBuf};

use genbound::bounds::{BoundInputs, C2Dims, KappaExponent, Mode};
use genbound::data::{sample_sphere, DataSpec};
use genbound::model::{ActivationKind, LossKind};
use genbound::rng::{derive_seed, label};
use genbound::sgm::{default_kappa, LearningRates, Schedule, TrainConfig};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// d = 1000, n = 250..5000, 20 repetitions, 10⁵ Monte-Carlo draws.
    PaperFull,
    /// d = 200, n = 250..2000, 10 repetitions, 10⁴ Monte-Carlo draws.
    DeskReduced,
    Custom,
}

/// Batch size as a function of the training-set size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BatchRule {
    /// `k = max(1, n / divisor)`
    Fraction { divisor: usize },
    Fixed { size: usize },
}

impl BatchRule {
    pub fn size(&self, n: usize) -> usize {
        match *self {
            BatchRule::Fraction { divisor } => (n / divisor.max(1)).max(1),
            BatchRule::Fixed { size } => size,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub mode: Mode,
    pub d_in: usize,
    pub hidden: usize,
    pub d_out: usize,
    pub lambda: f64,
    pub eta: f64,
    pub epochs: usize,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    pub activation: ActivationKind,
    pub loss: LossKind,
    pub noise_std: f64,
    pub ns: Vec<usize>,
    pub batch: BatchRule,
    pub repetitions: usize,
    pub mc_samples: usize,
    #[serde(default)]
    pub zetas: Vec<f64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Built-in settings; `Custom` starts from the desk-reduced values.
    pub fn preset(preset: Preset, mode: Mode) -> Self {
        let paper = preset == Preset::PaperFull;
        Self {
            preset,
            mode,
            d_in: 100,
            hidden: if paper { 1000 } else { 200 },
            d_out: 1,
            lambda: 0.1,
            eta: 0.01,
            epochs: 300,
            kappa: 2.0,
            activation: ActivationKind::Relu,
            loss: LossKind::L1Euclidean,
            noise_std: 1.0,
            ns: (1..=if paper { 20 } else { 8 }).map(|k| 250 * k).collect(),
            batch: BatchRule::Fraction { divisor: 10 },
            repetitions: if paper { 20 } else { 10 },
            mc_samples: if paper { 100_000 } else { 10_000 },
            zetas: vec![0.1],
            out_dir: None,
            seed: DEFAULT_SEED,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| HarnessError::parse(path, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Usage(m));
        if self.ns.is_empty() {
            return bad("the list of sample sizes is empty".into());
        }
        if self.ns[0] == 0 || self.ns.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("sample sizes must be positive and strictly increasing: {:?}", self.ns));
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if self.mc_samples == 0 {
            return bad("Monte-Carlo sample size must be at least 1".into());
        }
        if let BatchRule::Fraction { divisor: 0 } | BatchRule::Fixed { size: 0 } = self.batch {
            return bad("batch rule yields empty batches".into());
        }
        if let Some(z) = self.zetas.iter().find(|z| !(**z > 0.0 && **z < 1.0)) {
            return bad(format!("zeta must lie in (0, 1), got {z}"));
        }
        if !(self.noise_std >= 0.0) {
            return bad(format!("noise std must be nonnegative, got {}", self.noise_std));
        }
        self.rates().validate(self.lambda)?;
        self.loss.validate()?;
        Ok(())
    }

    pub fn rates(&self) -> LearningRates {
        let eta = Schedule::Constant { eta: self.eta };
        match self.mode {
            Mode::Frozen => LearningRates::frozen(eta, self.epochs),
            Mode::Joint => LearningRates::joint(eta, self.epochs),
        }
    }

    /// ρ with β drawn from `derive_seed(seed, [BETA])`, shared by every cell.
    pub fn data_spec(&self) -> Result<DataSpec> {
        Ok(DataSpec::seeded(self.d_in, self.d_out, self.noise_std, derive_seed(self.seed, &[label::BETA]))?)
    }

    /// Frozen mode: a uniform point on the unit sphere of `ℝ^{d × d_out}`, shared by every cell.
    pub fn frozen_w(&self) -> Result<Option<Array2<f64>>> {
        if self.mode != Mode::Frozen {
            return Ok(None);
        }
        let w = sample_sphere(self.hidden * self.d_out, 1, derive_seed(self.seed, &[label::FROZEN_W]))?;
        let w = w.into_shape_with_order((self.hidden, self.d_out)).expect("one row of d * d_out entries");
        Ok(Some(w))
    }

    pub fn train_config(&self, n: usize, fixed_w: Option<Array2<f64>>, seed: u64) -> TrainConfig {
        TrainConfig {
            d_in: self.d_in,
            hidden: self.hidden,
            d_out: self.d_out,
            lambda: self.lambda,
            rates: self.rates(),
            batch_size: self.batch.size(n),
            activation: self.activation,
            loss: self.loss,
            frozen_w: self.mode == Mode::Frozen,
            fixed_w,
            kappa: self.kappa,
            seed,
        }
    }

    /// Inputs for the a-priori bounds; frozen mode takes `‖w‖_F` of the shared `w`.
    pub fn bound_inputs(&self, w_norm: Option<f64>) -> BoundInputs {
        BoundInputs {
            d_in: self.d_in,
            hidden: self.hidden,
            d_out: self.d_out,
            lambda: self.lambda,
            kappa: self.kappa,
            rates: self.rates(),
            mode: self.mode,
            w_norm,
            zeta: None,
            fg_constant: None,
            n: None,
            c2_dims: C2Dims::Hidden,
            kappa_exponent: KappaExponent::Moment,
            activation: Some(self.activation),
            loss: Some(self.loss),
        }
    }

    /// Seed of repetition `rep` at sample size `n`; independent of the rest of the grid.
    pub fn cell_seed(&self, n: usize, rep: usize) -> u64 {
        derive_seed(self.seed, &[label::CELL, n as u64, rep as u64])
    }
}
