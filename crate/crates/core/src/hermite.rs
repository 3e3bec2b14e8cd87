//! Orthonormal probabilists' Hermite polynomials and Gauss–Hermite quadrature.
//!
//! `H_k` is normalised so that `∫ H_j H_k g = δ_jk` with the standard
//! Gaussian density `g(t) = exp(-t²/2)/√(2π)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::multiindex::{IndexSet, MultiIndex};

/// Largest degree accepted by [`HermiteEvaluator::default`].
pub const DEFAULT_MAX_DEGREE: usize = 200;

#[derive(Debug, Clone, Copy)]
pub struct HermiteEvaluator {
    max_degree: usize,
}

impl Default for HermiteEvaluator {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_DEGREE)
    }
}

impl HermiteEvaluator {
    pub fn new(max_degree: usize) -> Self {
        Self { max_degree }
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// `H_k(t)`.
    pub fn eval_univariate(&self, k: usize, t: f64) -> Result<f64> {
        self.check(k)?;
        Ok(hermite(k, t))
    }

    /// Writes `H_0(t), ..., H_{out.len()-1}(t)` into `out`.
    pub fn eval_all(&self, t: f64, out: &mut [f64]) -> Result<()> {
        if let Some(last) = out.len().checked_sub(1) {
            self.check(last)?;
        }
        hermite_all(t, out);
        Ok(())
    }

    /// `H_nu(y) = Π_j H_{nu_j}(y_j)`, with `y[0]` holding variable 1.
    pub fn eval_tensor(&self, nu: &MultiIndex, y: &[f64]) -> Result<f64> {
        if nu.max_position() > y.len() {
            return Err(Error::SupportOutOfRange {
                position: nu.max_position(),
                available: y.len(),
            });
        }
        let mut value = 1.0;
        for (p, e) in nu.iter() {
            self.check(e as usize)?;
            value *= hermite(e as usize, y[p - 1]);
        }
        Ok(value)
    }

    fn check(&self, k: usize) -> Result<()> {
        if k > self.max_degree {
            Err(Error::DegreeOverflow {
                degree: k,
                max: self.max_degree,
            })
        } else {
            Ok(())
        }
    }
}

/// Evaluates every `H_ν`, `ν ∈ Λ`, at one point, sharing univariate tables
/// across members.
#[derive(Debug, Clone)]
pub struct TensorBasis {
    set: IndexSet,
    /// Largest exponent per variable (index 0 is variable 1).
    max_exponents: Vec<u32>,
    /// Start of each variable's block in the univariate table.
    offsets: Vec<usize>,
    table_len: usize,
}

impl TensorBasis {
    pub fn new(set: IndexSet) -> Result<Self> {
        let vars = set.max_position();
        let max_exponents: Vec<u32> = (1..=vars).map(|j| set.max_exponent_at(j)).collect();
        if let Some(&worst) = max_exponents.iter().max() {
            HermiteEvaluator::default().check(worst as usize)?;
        }
        let mut offsets = Vec::with_capacity(vars);
        let mut table_len = 0;
        for &e in &max_exponents {
            offsets.push(table_len);
            table_len += e as usize + 1;
        }
        Ok(Self {
            set,
            max_exponents,
            offsets,
            table_len,
        })
    }

    pub fn set(&self) -> &IndexSet {
        &self.set
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    /// Number of leading coordinates of `y` that are read.
    pub fn num_vars(&self) -> usize {
        self.max_exponents.len()
    }

    /// Fills `out[i] = H_{ν_i}(y)` in set order.
    pub fn eval_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        if y.len() < self.num_vars() {
            return Err(Error::SupportOutOfRange {
                position: self.num_vars(),
                available: y.len(),
            });
        }
        assert_eq!(out.len(), self.set.len());
        let mut table = vec![0.0; self.table_len];
        for (j, (&e, &start)) in self.max_exponents.iter().zip(&self.offsets).enumerate() {
            hermite_all(y[j], &mut table[start..start + e as usize + 1]);
        }
        for (slot, nu) in out.iter_mut().zip(self.set.iter()) {
            *slot = nu
                .iter()
                .map(|(p, e)| table[self.offsets[p - 1] + e as usize])
                .product();
        }
        Ok(())
    }

    pub fn eval(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.set.len()];
        self.eval_into(y, &mut out)?;
        Ok(out)
    }
}

/// Unchecked `H_k(t)` by the normalised three-term recurrence.
pub(crate) fn hermite(k: usize, t: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for j in 0..k {
        let next = (t * cur - (j as f64).sqrt() * prev) / ((j + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// Unchecked table fill of `H_0(t), ..., H_{out.len()-1}(t)`.
pub(crate) fn hermite_all(t: f64, out: &mut [f64]) {
    let n = out.len();
    if n == 0 {
        return;
    }
    out[0] = 1.0;
    if n > 1 {
        out[1] = t;
    }
    for j in 1..n.saturating_sub(1) {
        out[j + 1] = (t * out[j] - (j as f64).sqrt() * out[j - 1]) / ((j + 1) as f64).sqrt();
    }
}

/// Gauss–Hermite rule with `q` nodes for the standard Gaussian weight.
///
/// Nodes are the eigenvalues of the Jacobi matrix (zero diagonal,
/// off-diagonal `√k`), polished by Newton steps on `H_q`. Weights use the
/// Christoffel form `1 / Σ_{k<q} H_k(x)²`, which is accurate even where the
/// weights are tiny. The rule is exact for polynomials up to degree `2q-1`.
pub fn gauss_hermite(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1, "Gauss-Hermite rule needs at least one node");
    let mut jacobi = DMatrix::<f64>::zeros(q, q);
    for k in 1..q {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(f64::total_cmp);

    let mut table = vec![0.0; q + 1];
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            hermite_all(*x, &mut table);
            let deriv = (q as f64).sqrt() * table[q - 1];
            if deriv == 0.0 {
                break;
            }
            let step = table[q] / deriv;
            *x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
    }
    // exact symmetry about the origin
    for i in 0..q / 2 {
        let half = 0.5 * (nodes[q - 1 - i] - nodes[i]);
        nodes[i] = -half;
        nodes[q - 1 - i] = half;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }

    let weights = nodes
        .iter()
        .map(|&x| {
            hermite_all(x, &mut table[..q]);
            1.0 / table[..q].iter().map(|h| h * h).sum::<f64>()
        })
        .collect();
    (nodes, weights)
}
