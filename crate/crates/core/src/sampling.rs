//! The optimal sampling measure `dμ = (1/n) Σ_{ν∈Λ} |H_ν|² dγ_J` and its
//! weight `w = dγ/dμ = n / Σ_{ν∈Λ} |H_ν|²`.
//!
//! A draw picks `ν` uniformly from `Λ` and then samples each coordinate
//! from the univariate density `|H_{ν_j}|² g` by inverting a tabulated CDF.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hermite::{hermite, TensorBasis};
use crate::multiindex::IndexSet;
use crate::rng;

/// Target accuracy of the interpolated CDF.
const CDF_TOLERANCE: f64 = 1e-8;

/// Inverse-CDF sampler for the density `|H_k(t)|² g(t)`.
///
/// The density is even, so only `t >= 0` is tabulated and the lower half is
/// obtained by reflection.
#[derive(Debug, Clone)]
pub struct UnivariateSampler {
    degree: usize,
    step: f64,
    /// `F(i * step)` for `i = 0..`, with `F(0) = 1/2` and a final value of 1.
    cdf: Vec<f64>,
}

fn density(k: usize, t: f64) -> f64 {
    let h = hermite(k, t);
    h * h * (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 30)
}

impl UnivariateSampler {
    pub fn new(degree: usize) -> Self {
        let half_width = (4.0 * degree as f64 + 2.0).sqrt() + 8.0;
        let f = |t: f64| density(degree, t);
        let mut cells = 1024usize;
        loop {
            let step = half_width / cells as f64;
            let mut cdf = Vec::with_capacity(cells + 1);
            let mut acc = 0.0;
            let mut worst_gap: f64 = 0.0;
            cdf.push(0.0);
            for i in 0..cells {
                let (a, b) = (i as f64 * step, (i + 1) as f64 * step);
                let m = 0.5 * (a + b);
                let left = adaptive_simpson(&f, a, m, 1e-16);
                let right = adaptive_simpson(&f, m, b, 1e-16);
                // interpolation error of the CDF at the cell midpoint
                worst_gap = worst_gap.max((0.5 * (left + right) - left).abs());
                acc += left + right;
                cdf.push(acc);
            }
            // half of the probability mass lies on t >= 0
            if worst_gap / (2.0 * acc) < CDF_TOLERANCE || cells >= 1 << 22 {
                for v in cdf.iter_mut() {
                    *v = 0.5 + 0.5 * *v / acc;
                }
                *cdf.last_mut().unwrap() = 1.0;
                return Self { degree, step, cdf };
            }
            cells *= 2;
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Tabulated CDF with linear interpolation.
    pub fn cdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0 - self.cdf(-t);
        }
        let pos = t / self.step;
        let i = pos.floor() as usize;
        if i + 1 >= self.cdf.len() {
            return 1.0;
        }
        let frac = pos - i as f64;
        self.cdf[i] + frac * (self.cdf[i + 1] - self.cdf[i])
    }

    /// Inverse of [`UnivariateSampler::cdf`].
    pub fn quantile(&self, u: f64) -> f64 {
        if u < 0.5 {
            return -self.quantile(1.0 - u);
        }
        let i = self.cdf.partition_point(|&v| v < u);
        if i == 0 {
            return 0.0;
        }
        if i >= self.cdf.len() {
            return (self.cdf.len() - 1) as f64 * self.step;
        }
        let (lo, hi) = (self.cdf[i - 1], self.cdf[i]);
        let frac = if hi > lo { (u - lo) / (hi - lo) } else { 0.0 };
        (i - 1) as f64 * self.step + frac * self.step
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

/// Sampler for `|H_k|² g`.
pub fn univariate_sampler(k: usize) -> UnivariateSampler {
    UnivariateSampler::new(k)
}

/// One draw from the measure together with its weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPoint {
    pub y: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct SamplingMeasure {
    basis: TensorBasis,
    num_vars: usize,
    /// `samplers[k - 1]` handles degree `k >= 1`.
    samplers: Vec<Arc<UnivariateSampler>>,
}

impl SamplingMeasure {
    /// Measure for `set` over the first `num_vars` coordinates.
    pub fn new(set: IndexSet, num_vars: usize) -> Result<Self> {
        if set.is_empty() || !set.is_downward_closed() {
            return Err(Error::NotDownwardClosed(
                "sampling needs a nonempty downward-closed set".into(),
            ));
        }
        if set.max_position() > num_vars {
            return Err(Error::SupportOutOfRange {
                position: set.max_position(),
                available: num_vars,
            });
        }
        let max_degree = set.max_exponent() as usize;
        let samplers = (1..=max_degree)
            .into_par_iter()
            .map(|k| Arc::new(UnivariateSampler::new(k)))
            .collect();
        Ok(Self {
            basis: TensorBasis::new(set)?,
            num_vars,
            samplers,
        })
    }

    pub fn index_set(&self) -> &IndexSet {
        self.basis.set()
    }

    pub fn basis(&self) -> &TensorBasis {
        &self.basis
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// `w(y) = n / Σ_ν |H_ν(y)|²`; never divides by zero since `0 ∈ Λ`.
    pub fn weight(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.num_vars {
            return Err(Error::SupportOutOfRange {
                position: self.num_vars,
                available: y.len(),
            });
        }
        let h = self.basis.eval(y)?;
        Ok(weight_from_features(&h))
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> WeightedPoint {
        let members = self.basis.set().members();
        let nu = &members[rng.random_range(0..members.len())];
        let y: Vec<f64> = (1..=self.num_vars)
            .map(|j| match nu.get(j) {
                0 => rng.sample(StandardNormal),
                k => self.samplers[k as usize - 1].sample(rng),
            })
            .collect();
        let weight = self.weight(&y).expect("draw has the measure's dimension");
        WeightedPoint { y, weight }
    }

    /// Draw number `index` of the run seeded by `seed`.
    pub fn draw_indexed(&self, seed: u64, index: u64) -> WeightedPoint {
        self.draw(&mut rng::stream(seed, index))
    }

    /// Draws `start..start + count` in index order, computed in parallel.
    pub fn draw_range(&self, seed: u64, start: u64, count: usize) -> Vec<WeightedPoint> {
        (start..start + count as u64)
            .into_par_iter()
            .map(|i| self.draw_indexed(seed, i))
            .collect()
    }
}

pub(crate) fn weight_from_features(h: &[f64]) -> f64 {
    let norm2: f64 = h.iter().map(|v| v * v).sum();
    debug_assert!(norm2 >= 1.0 - 1e-12, "H_0 contributes one");
    h.len() as f64 / norm2
}
