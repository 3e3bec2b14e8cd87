use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem1d::Forcing;

/// Rule for the number of samples `m` used with `n` indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetRule {
    /// `m = 3 n ⌈ln n⌉`.
    Log,
    /// Smallest `m` with `n <= κ(s) m / ln m`, `κ(s) = (1 - ln 2) / (2 + 4s)`.
    Kappa,
}

/// Settings of one experiment run, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "defaults::beta")]
    pub beta: f64,
    #[serde(default = "defaults::tau")]
    pub tau: f64,
    /// Schauder truncation level `L`.
    #[serde(default = "defaults::levels")]
    pub levels: u32,
    #[serde(default = "defaults::r")]
    pub r: u32,
    /// Mesh with `2^M` elements.
    #[serde(default = "defaults::mesh_exponent")]
    pub mesh_exponent: u32,
    #[serde(default = "defaults::n_schedule")]
    pub n_schedule: Vec<usize>,
    #[serde(default = "defaults::budget")]
    pub budget: BudgetRule,
    /// `s` in `κ(s)`, used by [`BudgetRule::Kappa`].
    #[serde(default = "defaults::kappa_s")]
    pub kappa_s: f64,
    #[serde(default = "defaults::n_ref")]
    pub n_ref: usize,
    /// `c` in `m_ref = c n_ref ⌈ln n_ref⌉`.
    #[serde(default = "defaults::m_ref_factor")]
    pub m_ref_factor: usize,
    /// Monte Carlo repetitions per `n`.
    #[serde(default = "defaults::mc_repetitions")]
    pub mc_repetitions: usize,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    /// Constant right-hand side `f`.
    #[serde(default = "defaults::forcing")]
    pub forcing: f64,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: PathBuf,
}

mod defaults {
    use super::BudgetRule;
    use std::path::PathBuf;

    pub fn beta() -> f64 {
        0.5
    }
    pub fn tau() -> f64 {
        1.0
    }
    pub fn levels() -> u32 {
        6
    }
    pub fn r() -> u32 {
        1
    }
    pub fn mesh_exponent() -> u32 {
        9
    }
    pub fn n_schedule() -> Vec<usize> {
        vec![25, 50, 100, 200, 400]
    }
    pub fn budget() -> BudgetRule {
        BudgetRule::Log
    }
    pub fn kappa_s() -> f64 {
        1.0
    }
    pub fn n_ref() -> usize {
        800
    }
    pub fn m_ref_factor() -> usize {
        20
    }
    pub fn mc_repetitions() -> usize {
        5
    }
    pub fn seed() -> u64 {
        20_240_601
    }
    pub fn forcing() -> f64 {
        1.0
    }
    pub fn output_dir() -> PathBuf {
        PathBuf::from("wls-output")
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("every field has a default")
    }
}

/// `⌈ln n⌉`, floored at 1 so that `n = 1` still gets samples.
pub fn ceil_ln(n: usize) -> usize {
    ((n as f64).ln().ceil() as usize).max(1)
}

/// `κ(s) = (1 - ln 2) / (2 + 4s)`.
pub fn kappa(s: f64) -> f64 {
    (1.0 - std::f64::consts::LN_2) / (2.0 + 4.0 * s)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.beta > 0.0) {
            return fail(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.tau > 0.0) {
            return fail(format!("tau must be positive, got {}", self.tau));
        }
        if self.r == 0 {
            return fail("r must be at least 1".into());
        }
        if self.mesh_exponent < self.levels + 1 {
            return fail(format!(
                "mesh exponent {} must be at least levels + 1 = {}",
                self.mesh_exponent,
                self.levels + 1
            ));
        }
        if self.n_schedule.is_empty() || self.n_schedule.contains(&0) {
            return fail("n schedule must be a nonempty list of positive sizes".into());
        }
        if self.n_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return fail("n schedule must be strictly increasing".into());
        }
        let largest = *self.n_schedule.iter().max().unwrap();
        if self.n_ref < largest {
            return fail(format!("n_ref = {} is below the largest scheduled n = {largest}", self.n_ref));
        }
        if self.mc_repetitions == 0 {
            return fail("mc_repetitions must be at least 1".into());
        }
        if self.m_ref_factor == 0 {
            return fail("m_ref_factor must be at least 1".into());
        }
        if self.budget == BudgetRule::Kappa && !(self.kappa_s > 0.0) {
            return fail("kappa_s must be positive".into());
        }
        Ok(())
    }

    /// Number of samples for an estimator on `n` indices.
    pub fn budget(&self, n: usize) -> usize {
        match self.budget {
            BudgetRule::Log => 3 * n * ceil_ln(n),
            BudgetRule::Kappa => kappa_budget(n, kappa(self.kappa_s)),
        }
    }

    /// `m_ref = c n_ref ⌈ln n_ref⌉`.
    pub fn reference_budget(&self) -> usize {
        self.m_ref_factor * self.n_ref * ceil_ln(self.n_ref)
    }

    pub fn forcing(&self) -> Forcing {
        Forcing::Constant(self.forcing)
    }

    /// Full-size reference: `n_ref = 5000`.
    pub fn paper_scale(mut self) -> Self {
        self.n_ref = 5000;
        self
    }
}

/// Smallest `m >= 3` with `n <= κ m / ln m`; `m / ln m` increases from there.
fn kappa_budget(n: usize, kappa: f64) -> usize {
    let ok = |m: usize| n as f64 <= kappa * m as f64 / (m as f64).ln();
    let (mut lo, mut hi) = (2usize, 3usize);
    while !ok(hi) {
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
