//! Decay weights `ξ_ν` and the near-optimal index sets `Λ_n`.
//!
//! For the Schauder basis the sequence is `ρ_i ∝ 2^{β ⌊log₂ i⌋}`,
//! normalised so that `sup_x Σ_i ρ_i |ψ_i(x)| = ln 2 / (2 √r)`; a field
//! rescaled by `τ` divides every `ρ_i` by `τ`. `Λ_n` collects the `n`
//! smallest `ξ_ν`, grown greedily through the reduced margin.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::field::{hat, SchauderField};
use crate::multiindex::{canonical_cmp, IndexSet, MultiIndex};

/// Products above this switch to log-domain accumulation.
const LINEAR_DOMAIN_LIMIT: f64 = 1e300;

#[derive(Debug, Clone, PartialEq)]
pub struct RhoSequence {
    beta: f64,
    levels: usize,
    r: u32,
    tau: f64,
    values: Vec<f64>,
    normalizer: f64,
}

impl RhoSequence {
    /// Builds `ρ_1, ..., ρ_{2^{L+1}-1}` for the level-`L` Schauder basis
    /// rescaled by `tau`.
    pub fn build(beta: f64, levels: usize, r: u32, tau: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!("beta must be positive, got {beta}")));
        }
        if r == 0 {
            return Err(Error::Config("r must be at least 1".into()));
        }
        let field = SchauderField::new(levels, tau)?;
        let level_weight = |l: usize| (beta * l as f64).exp2();
        let normalizer = field
            .breakpoints()
            .into_iter()
            .map(|x| {
                (0..=levels)
                    .map(|l| {
                        let count = 1usize << l;
                        let k = ((x * count as f64) as usize).min(count - 1);
                        level_weight(l) * hat(l, k, x)
                    })
                    .sum::<f64>()
            })
            .fold(0.0f64, f64::max);
        let scale = std::f64::consts::LN_2 / (2.0 * normalizer * (r as f64).sqrt() * tau);
        let values = (1..=field.num_functions())
            .map(|i| level_weight(floor_log2(i)) * scale)
            .collect();
        Ok(Self {
            beta,
            levels,
            r,
            tau,
            values,
            normalizer,
        })
    }

    /// An arbitrary positive sequence, with no Schauder structure attached.
    pub fn from_values(values: Vec<f64>, r: u32) -> Result<Self> {
        if r == 0 {
            return Err(Error::Config("r must be at least 1".into()));
        }
        if values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Config("rho values must be positive and finite".into()));
        }
        Ok(Self {
            beta: f64::NAN,
            levels: 0,
            r,
            tau: 1.0,
            values,
            normalizer: f64::NAN,
        })
    }

    /// Same sequence with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `C = sup_x Σ ρ̃_i |ψ_i(x)|` before normalisation.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// `ρ_1, ρ_2, ...` (index 0 holds `ρ_1`).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `ξ_ν = Π_j Σ_{l=0}^{r} C(ν_j, l) ρ_j^{2l}`.
    pub fn xi(&self, nu: &MultiIndex) -> Result<XiWeight> {
        if nu.max_position() > self.values.len() {
            return Err(Error::SupportOutOfRange {
                position: nu.max_position(),
                available: self.values.len(),
            });
        }
        // Sorting the factors makes the result invariant under permutations
        // of variables that share a rho value.
        let mut factors: Vec<(f64, f64)> = nu
            .iter()
            .map(|(p, e)| factor(e, self.values[p - 1], self.r))
            .collect();
        factors.sort_by(|a, b| a.1.total_cmp(&b.1));
        let product: f64 = factors.iter().map(|f| f.0).product();
        let weight = if product.is_finite() && product <= LINEAR_DOMAIN_LIMIT {
            XiWeight {
                value: product,
                ln_value: product.ln(),
            }
        } else {
            let ln_value: f64 = factors.iter().map(|f| f.1).sum();
            XiWeight {
                value: ln_value.exp(),
                ln_value,
            }
        };
        Ok(weight)
    }
}

fn floor_log2(i: usize) -> usize {
    (usize::BITS - 1 - i.leading_zeros()) as usize
}

/// One factor `Σ_{l<=min(r,k)} C(k,l) ρ^{2l}` as `(value, ln value)`.
fn factor(k: u32, rho: f64, r: u32) -> (f64, f64) {
    let rho2 = rho * rho;
    let top = k.min(r);
    let mut binom = 1.0;
    let mut sum = 1.0;
    let mut power = 1.0;
    for l in 1..=top {
        binom *= (k - l + 1) as f64 / l as f64;
        power *= rho2;
        sum += binom * power;
    }
    if sum.is_finite() {
        return (sum, sum.ln());
    }
    // log-sum-exp over the terms
    let mut ln_binom = 0.0;
    let terms: Vec<f64> = (0..=top)
        .map(|l| {
            if l > 0 {
                ln_binom += (((k - l + 1) as f64) / l as f64).ln();
            }
            ln_binom + 2.0 * l as f64 * rho.ln()
        })
        .collect();
    let peak = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ln = peak + terms.iter().map(|t| (t - peak).exp()).sum::<f64>().ln();
    (f64::INFINITY, ln)
}

/// A value of `ξ_ν`, compared through its logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiWeight {
    /// `ξ_ν`, `+inf` once beyond `f64` range.
    pub value: f64,
    pub ln_value: f64,
}

impl XiWeight {
    pub fn cmp_value(&self, other: &Self) -> Ordering {
        self.ln_value.total_cmp(&other.ln_value)
    }
}

struct Candidate {
    xi: XiWeight,
    nu: MultiIndex,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.xi
            .cmp_value(&other.xi)
            .then_with(|| canonical_cmp(&self.nu, &other.nu))
    }
}

/// Selection order used by [`build_lambda`]: `ξ` ascending, then the
/// canonical multi-index order.
pub fn selection_cmp(a: (&MultiIndex, XiWeight), b: (&MultiIndex, XiWeight)) -> Ordering {
    a.1.cmp_value(&b.1).then_with(|| canonical_cmp(a.0, b.0))
}

/// The `n` indices with smallest `ξ_ν` over variables `1..=num_vars`,
/// listed in selection order.
///
/// Greedy growth from `{0}` through the reduced margin is exact because
/// `ξ` is monotone: every predecessor of a selected index has a strictly
/// smaller key and is therefore already selected.
pub fn build_lambda(n: usize, rho: &RhoSequence, num_vars: usize) -> Result<IndexSet> {
    if num_vars > rho.len() {
        return Err(Error::SupportOutOfRange {
            position: num_vars,
            available: rho.len(),
        });
    }
    let mut members = Vec::with_capacity(n);
    let mut heap = BinaryHeap::new();
    let zero = MultiIndex::zero();
    heap.push(Reverse(Candidate {
        xi: rho.xi(&zero)?,
        nu: zero,
    }));
    let mut lookup = std::collections::HashSet::with_capacity(n);
    while members.len() < n {
        let Some(Reverse(best)) = heap.pop() else {
            break;
        };
        lookup.insert(best.nu.clone());
        for j in 1..=num_vars {
            let cand = best.nu.add_unit(j);
            // admissible exactly once: when its last missing predecessor arrives
            if cand.predecessors().all(|p| lookup.contains(&p)) {
                heap.push(Reverse(Candidate {
                    xi: rho.xi(&cand)?,
                    nu: cand,
                }));
            }
        }
        members.push(best.nu);
    }
    IndexSet::from_ordered(members)
}

/// `(ν, ξ_ν)` for every member, in set order.
pub fn xi_table(set: &IndexSet, rho: &RhoSequence) -> Result<Vec<(MultiIndex, XiWeight)>> {
    set.iter().map(|nu| Ok((nu.clone(), rho.xi(nu)?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SchauderField;
    use proptest::prelude::*;

    fn mi(d: &[u32]) -> MultiIndex {
        MultiIndex::from_dense(d)
    }

    #[test]
    fn single_level_sequence() {
        for beta in [0.125, 0.5, 0.9] {
            let rho = RhoSequence::build(beta, 0, 1, 1.0).unwrap();
            assert_eq!(rho.len(), 1);
            assert!((rho.normalizer() - 0.5).abs() < 1e-15);
            assert!((rho.values()[0] - std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn normalised_sum_hits_half_the_bound() {
        for (beta, levels, r) in [(0.5, 1, 1), (0.25, 4, 2), (0.125, 6, 1), (0.5, 6, 3)] {
            let rho = RhoSequence::build(beta, levels, r, 1.0).unwrap();
            let field = SchauderField::new(levels, 1.0).unwrap();
            let sup = field
                .breakpoints()
                .into_iter()
                .map(|x| {
                    (1..=rho.len())
                        .map(|j| rho.values()[j - 1] * field.eval_basis(j, x).unwrap())
                        .sum::<f64>()
                })
                .fold(0.0, f64::max);
            let target = std::f64::consts::LN_2 / (2.0 * (r as f64).sqrt());
            assert!((sup - target).abs() < 1e-14, "{sup} vs {target}");
        }
    }

    #[test]
    fn two_level_normaliser_matches_dense_search() {
        let rho = RhoSequence::build(0.5, 1, 1, 1.0).unwrap();
        let field = SchauderField::new(1, 1.0).unwrap();
        let s2 = 2f64.sqrt();
        let dense = (0..=100_000)
            .map(|i| {
                let x = i as f64 / 100_000.0;
                field.eval_basis(1, x).unwrap()
                    + s2 * (field.eval_basis(2, x).unwrap() + field.eval_basis(3, x).unwrap())
            })
            .fold(0.0, f64::max);
        assert!((rho.normalizer() - dense).abs() < 1e-9);
        let rt = rho.values();
        assert!((rt[1] / rt[0] - s2).abs() < 1e-15 && rt[1] == rt[2]);
    }

    #[test]
    fn xi_examples() {
        let rho = RhoSequence::from_values(vec![0.7, 0.3], 1).unwrap();
        assert_eq!(rho.xi(&MultiIndex::zero()).unwrap().value, 1.0);
        let x = rho.xi(&mi(&[1])).unwrap().value;
        assert!((x - (1.0 + 0.49)).abs() < 1e-15);
        let x = rho.xi(&mi(&[2, 1])).unwrap().value;
        assert!((x - (1.0 + 2.0 * 0.49) * (1.0 + 0.09)).abs() < 1e-14);
        // direct double sum over nu' <= nu with entries <= 1
        let (r1, r2) = (0.7f64, 0.3f64);
        let direct = 1.0 + 2.0 * r1.powi(2) + r2.powi(2) + 2.0 * r1.powi(2) * r2.powi(2);
        assert!((x - direct).abs() < 1e-14);
    }

    #[test]
    fn general_r_factor() {
        let rho = RhoSequence::from_values(vec![1.5], 3).unwrap();
        // C(5,0) + C(5,1)ρ² + C(5,2)ρ⁴ + C(5,3)ρ⁶
        let p: f64 = 2.25;
        let expected = 1.0 + 5.0 * p + 10.0 * p * p + 10.0 * p * p * p;
        assert!((rho.xi(&mi(&[5])).unwrap().value - expected).abs() < 1e-12);
        // convention C(k, l) = 0 for l > k
        assert!((rho.xi(&mi(&[2])).unwrap().value - (1.0 + 2.0 * p + p * p)).abs() < 1e-13);
    }

    #[test]
    fn overflowing_weights_use_log_domain() {
        let rho = RhoSequence::from_values(vec![1e3; 60], 1).unwrap();
        let nu = MultiIndex::from_dense(&[50; 60]);
        let xi = rho.xi(&nu).unwrap();
        let expected = 60.0 * (1.0 + 50.0 * 1e6f64).ln();
        assert!(xi.value.is_infinite());
        assert!((xi.ln_value - expected).abs() < 1e-9 * expected);
        let bigger = rho.xi(&nu.add_unit(3)).unwrap();
        assert_eq!(bigger.cmp_value(&xi), Ordering::Greater);
    }

    #[test]
    fn small_lambda_examples() {
        let rho = RhoSequence::from_values(vec![0.9, 0.4], 1).unwrap();
        assert_eq!(build_lambda(1, &rho, 2).unwrap().members(), &[MultiIndex::zero()]);
        let l3 = build_lambda(3, &rho, 2).unwrap();
        // ξ(0,2) = 1.32 sits below ξ(1,0) = 1.81
        assert_eq!(l3.members(), &[MultiIndex::zero(), mi(&[0, 1]), mi(&[0, 2])]);
        let l7 = build_lambda(7, &rho, 2).unwrap();
        assert_eq!(l7.members()[5], mi(&[0, 5]));
        assert_eq!(l7.members()[6], mi(&[1]));
        assert!(build_lambda(3, &rho, 3).is_err());
    }

    fn brute_force(n: usize, rho: &RhoSequence, vars: usize, bound: u32) -> Vec<MultiIndex> {
        let mut all = Vec::new();
        let mut counter = vec![0u32; vars];
        'outer: loop {
            all.push(MultiIndex::from_dense(&counter));
            for c in counter.iter_mut() {
                *c += 1;
                if *c <= bound {
                    continue 'outer;
                }
                *c = 0;
            }
            break;
        }
        let mut keyed: Vec<_> = all.into_iter().map(|nu| (rho.xi(&nu).unwrap(), nu)).collect();
        keyed.sort_by(|a, b| selection_cmp((&a.1, a.0), (&b.1, b.0)));
        keyed.into_iter().take(n).map(|(_, nu)| nu).collect()
    }

    #[test]
    fn six_smallest_match_brute_force() {
        let rho = RhoSequence::build(0.5, 1, 1, 1.0).unwrap();
        let greedy = build_lambda(6, &rho, 3).unwrap();
        let brute = brute_force(6, &rho, 3, 6);
        assert_eq!(greedy.members(), &brute[..]);
    }

    #[test]
    fn sizes_and_closedness_across_parameters() {
        for beta in [0.125, 0.25, 0.5] {
            for levels in 0..=4 {
                let rho = RhoSequence::build(beta, levels, 1, 1.0).unwrap();
                for n in [1, 2, 7, 60, 500] {
                    let set = build_lambda(n, &rho, rho.len()).unwrap();
                    assert_eq!(set.len(), n);
                    assert!(set.is_downward_closed());
                }
            }
        }
    }

    #[test]
    fn rescaling_the_field_matches_rescaled_rho() {
        for tau in [0.1, 0.5, 3.0] {
            let scaled = RhoSequence::build(0.25, 3, 1, tau).unwrap();
            let base = RhoSequence::build(0.25, 3, 1, 1.0).unwrap().scaled(1.0 / tau);
            for (a, b) in scaled.values().iter().zip(base.values()) {
                assert!((a - b).abs() <= 1e-15 * a.abs());
            }
            let a = build_lambda(200, &scaled, scaled.len()).unwrap();
            let b = build_lambda(200, &base, base.len()).unwrap();
            assert_eq!(a, b);
        }
    }

    proptest! {
        #[test]
        fn xi_is_monotone(
            big in prop::collection::vec(0u32..=5, 6),
            cut in prop::collection::vec(0u32..=5, 6),
            beta in 0.05f64..1.0,
        ) {
            let rho = RhoSequence::build(beta, 2, 1, 1.0).unwrap();
            let small: Vec<u32> = big.iter().zip(&cut).map(|(b, c)| b.saturating_sub(*c)).collect();
            let (nu, nu_small) = (MultiIndex::from_dense(&big), MultiIndex::from_dense(&small));
            let (x, xs) = (rho.xi(&nu).unwrap(), rho.xi(&nu_small).unwrap());
            prop_assert!(xs.value <= x.value);
            prop_assert!(xs.value >= 1.0);
            prop_assert_eq!(xs.value == 1.0, nu_small.is_zero());
        }
    }
}
