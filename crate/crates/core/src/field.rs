//! Truncated Brownian bridge in the Schauder (Lévy–Ciesielski) hat basis.
//!
//! Functions are enumerated coarse to fine with the flat index
//! `j = 2^l + k`, `0 <= k < 2^l`, so levels `0..=L` give `J = 2^{L+1} - 1`
//! functions. The field is `b_J(x, y) = τ Σ_j y_j ψ_j(x)`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Mother hat `max(1/2 - |x - 1/2|, 0)`.
#[inline]
fn mother_hat(s: f64) -> f64 {
    (0.5 - (s - 0.5).abs()).max(0.0)
}

/// `(level, shift)` of the flat index `j >= 1`.
pub fn decode(j: usize) -> (usize, usize) {
    assert!(j >= 1, "Schauder indices are 1-based");
    let l = (usize::BITS - 1 - j.leading_zeros()) as usize;
    (l, j - (1 << l))
}

/// Flat index of `(level, shift)`.
pub fn encode(level: usize, shift: usize) -> usize {
    assert!(shift < (1 << level));
    (1 << level) + shift
}

/// `ψ_{l,k}(x) = 2^{-l/2} ψ(2^l x - k)` without range checks.
#[inline]
pub(crate) fn hat(level: usize, shift: usize, x: f64) -> f64 {
    let scale = (level as f64 * -0.5).exp2();
    scale * mother_hat(x * (1u64 << level) as f64 - shift as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchauderField {
    levels: usize,
    tau: f64,
}

impl SchauderField {
    /// Field with levels `0..=max_level` and amplitude `tau`.
    pub fn new(max_level: usize, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Config(format!("field rescaling must be positive, got {tau}")));
        }
        if max_level > 24 {
            return Err(Error::Config(format!("level {max_level} is too deep")));
        }
        Ok(Self {
            levels: max_level,
            tau,
        })
    }

    pub fn max_level(&self) -> usize {
        self.levels
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Total function count `J = 2^{L+1} - 1`.
    pub fn num_functions(&self) -> usize {
        (1 << (self.levels + 1)) - 1
    }

    /// `ψ_j(x)` (unscaled by τ).
    pub fn eval_basis(&self, j: usize, x: f64) -> Result<f64> {
        if j == 0 || j > self.num_functions() {
            return Err(Error::BasisIndexOutOfRange(j, self.num_functions()));
        }
        check_point(x)?;
        let (l, k) = decode(j);
        Ok(hat(l, k, x))
    }

    /// `b_J(x, y)`, visiting the one active hat per level.
    pub fn eval_field(&self, y: &[f64], x: f64) -> Result<f64> {
        if y.len() < self.num_functions() {
            return Err(Error::SupportOutOfRange {
                position: self.num_functions(),
                available: y.len(),
            });
        }
        check_point(x)?;
        Ok(self.eval_unchecked(y, x))
    }

    pub(crate) fn eval_unchecked(&self, y: &[f64], x: f64) -> f64 {
        let mut sum = 0.0;
        for l in 0..=self.levels {
            let count = 1usize << l;
            let k = ((x * count as f64) as usize).min(count - 1);
            sum += y[count + k - 1] * hat(l, k, x);
        }
        self.tau * sum
    }

    /// Dyadic grid `{i 2^{-(L+1)}}`; `b_J` is linear between neighbours.
    pub fn breakpoints(&self) -> Vec<f64> {
        let cells = 1usize << (self.levels + 1);
        (0..=cells).map(|i| i as f64 / cells as f64).collect()
    }

    /// `sup_x |b_J(x, y)|`, attained on the breakpoints.
    pub fn sup_norm(&self, y: &[f64]) -> Result<f64> {
        self.breakpoints()
            .into_iter()
            .map(|x| self.eval_field(y, x).map(f64::abs))
            .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
    }

    /// Draws `J` independent standard normal coefficients.
    pub fn sample_coefficients<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.num_functions())
            .map(|_| rng.sample(StandardNormal))
            .collect()
    }
}

fn check_point(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::PointOutOfRange(x))
    }
}
