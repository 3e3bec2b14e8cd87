//! P1 finite elements on `[0, 1]` for `-(a u')' = f`, `u(0) = u(1) = 0`,
//! with `a = exp(b_J)`.
//!
//! Element integrals of `a` are split at the field breakpoints falling
//! inside an element, so each piece sees an exponential of a linear
//! function and is integrated with 3-point Gauss–Legendre.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::SchauderField;

/// 3-point Gauss–Legendre on `[0, 1]`.
const GL3_NODES: [f64; 3] = [
    0.112_701_665_379_258_31,
    0.5,
    0.887_298_334_620_741_7,
];
const GL3_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<f64>,
}

impl Mesh {
    /// Uniform mesh with `2^exponent` elements.
    pub fn uniform_dyadic(exponent: u32) -> Result<Self> {
        if exponent == 0 || exponent > 26 {
            return Err(Error::InvalidMesh(format!("mesh exponent {exponent} out of range")));
        }
        let cells = 1usize << exponent;
        Self::from_nodes((0..=cells).map(|i| i as f64 / cells as f64).collect())
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::InvalidMesh("need at least two elements".into()));
        }
        if nodes[0] != 0.0 || *nodes.last().unwrap() != 1.0 {
            return Err(Error::InvalidMesh("mesh must span [0, 1]".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidMesh("nodes must be strictly increasing".into()));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn num_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Interior degrees of freedom `n_h`.
    pub fn num_dofs(&self) -> usize {
        self.nodes.len() - 2
    }

    /// Interior node coordinates.
    pub fn interior(&self) -> &[f64] {
        &self.nodes[1..self.nodes.len() - 1]
    }

    /// Whether every point of `points` is a mesh node.
    pub fn contains_points(&self, points: &[f64]) -> bool {
        points
            .iter()
            .all(|p| self.nodes.binary_search_by(|x| x.total_cmp(p)).is_ok())
    }
}

/// Right-hand side `f`.
#[derive(Clone)]
pub enum Forcing {
    Constant(f64),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Default for Forcing {
    fn default() -> Self {
        Forcing::Constant(1.0)
    }
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Constant(c) => write!(f, "Constant({c})"),
            Forcing::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl Forcing {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Forcing::Constant(c) => *c,
            Forcing::Function(g) => g(x),
        }
    }

    /// `||f||_{V'}` for constant forcing: `|c| / √12`, the energy of the
    /// solution of `-u'' = c`. `None` for general functions.
    pub fn dual_norm(&self) -> Option<f64> {
        match self {
            Forcing::Constant(c) => Some(c.abs() / 12f64.sqrt()),
            Forcing::Function(_) => None,
        }
    }
}

/// Assembled tridiagonal stiffness matrix and load vector.
#[derive(Debug, Clone)]
pub struct FemSystem {
    mesh: Arc<Mesh>,
    diag: Vec<f64>,
    /// `off[i]` couples dofs `i` and `i + 1`.
    off: Vec<f64>,
    load: Vec<f64>,
}

impl FemSystem {
    pub fn assemble(
        field: &SchauderField,
        y: &[f64],
        forcing: &Forcing,
        mesh: &Arc<Mesh>,
    ) -> Result<Self> {
        if y.len() < field.num_functions() {
            return Err(Error::SupportOutOfRange {
                position: field.num_functions(),
                available: y.len(),
            });
        }
        let nodes = mesh.nodes();
        let n_el = mesh.num_elements();
        let dofs = mesh.num_dofs();
        let cells = (1u64 << (field.max_level() + 1)) as f64;
        let b_nodes: Vec<f64> = nodes.iter().map(|&x| field.eval_unchecked(y, x)).collect();

        let mut diag = vec![0.0; dofs];
        let mut off = vec![0.0; dofs.saturating_sub(1)];
        let mut load = vec![0.0; dofs];
        let mut pieces = Vec::new();
        for e in 0..n_el {
            let (x0, x1) = (nodes[e], nodes[e + 1]);
            let h = x1 - x0;

            pieces.clear();
            pieces.push((x0, b_nodes[e]));
            let first = (x0 * cells).floor() as u64 + 1;
            let mut i = first;
            while (i as f64) < x1 * cells {
                let xb = i as f64 / cells;
                pieces.push((xb, field.eval_unchecked(y, xb)));
                i += 1;
            }
            pieces.push((x1, b_nodes[e + 1]));
            let integral: f64 = pieces
                .windows(2)
                .map(|w| {
                    let ((xa, ba), (xb, bb)) = (w[0], w[1]);
                    (xb - xa)
                        * GL3_NODES
                            .iter()
                            .zip(GL3_WEIGHTS)
                            .map(|(s, wt)| wt * (ba + s * (bb - ba)).exp())
                            .sum::<f64>()
                })
                .sum();
            let k = integral / (h * h);

            // load contributions to the left and right node of the element
            let (fl, fr) = match forcing {
                Forcing::Constant(c) => (0.5 * c * h, 0.5 * c * h),
                Forcing::Function(g) => GL3_NODES.iter().zip(GL3_WEIGHTS).fold(
                    (0.0, 0.0),
                    |(l, r), (s, wt)| {
                        let fx = g(x0 + s * h);
                        (l + h * wt * fx * (1.0 - s), r + h * wt * fx * s)
                    },
                ),
            };

            // interior dof of node i is i - 1
            if e >= 1 {
                diag[e - 1] += k;
                load[e - 1] += fl;
            }
            if e < dofs {
                diag[e] += k;
                load[e] += fr;
            }
            if e >= 1 && e < dofs {
                off[e - 1] -= k;
            }
        }
        Ok(Self {
            mesh: Arc::clone(mesh),
            diag,
            off,
            load,
        })
    }

    /// Thomas algorithm; the matrix is symmetric positive definite when
    /// `a > 0`, so every pivot must be positive.
    pub fn solve(&self) -> Result<FemSolution> {
        let n = self.diag.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut pivot = self.diag[0];
        if !(pivot > 0.0) {
            return Err(Error::NotPositiveDefinite(0));
        }
        c[0] = self.off.first().copied().unwrap_or(0.0) / pivot;
        d[0] = self.load[0] / pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.off[i - 1] * c[i - 1];
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(Error::NotPositiveDefinite(i));
            }
            c[i] = self.off.get(i).copied().unwrap_or(0.0) / pivot;
            d[i] = (self.load[i] - self.off[i - 1] * d[i - 1]) / pivot;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Ok(FemSolution {
            mesh: Arc::clone(&self.mesh),
            values: d,
        })
    }

    /// `A u - F`, the discrete Galerkin residual against each hat.
    pub fn residual(&self, u: &FemSolution) -> Vec<f64> {
        let v = &u.values;
        (0..self.diag.len())
            .map(|i| {
                let mut r = self.diag[i] * v[i] - self.load[i];
                if i > 0 {
                    r += self.off[i - 1] * v[i - 1];
                }
                if i + 1 < v.len() {
                    r += self.off[i] * v[i + 1];
                }
                r
            })
            .collect()
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }
}

/// Galerkin approximation `u_h(y)` for the field coefficients `y`.
pub fn solve(
    field: &SchauderField,
    y: &[f64],
    forcing: &Forcing,
    mesh: &Arc<Mesh>,
) -> Result<FemSolution> {
    FemSystem::assemble(field, y, forcing, mesh)?.solve()
}

/// Continuous piecewise-linear function vanishing at 0 and 1, stored by its
/// interior nodal values.
#[derive(Debug, Clone)]
pub struct FemSolution {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl FemSolution {
    pub fn zero(mesh: &Arc<Mesh>) -> Self {
        Self {
            mesh: Arc::clone(mesh),
            values: vec![0.0; mesh.num_dofs()],
        }
    }

    pub fn from_values(mesh: &Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_dofs() {
            return Err(Error::MeshMismatch);
        }
        Ok(Self {
            mesh: Arc::clone(mesh),
            values,
        })
    }

    /// Nodal basis function of interior dof `i`.
    pub fn hat(mesh: &Arc<Mesh>, i: usize) -> Self {
        let mut u = Self::zero(mesh);
        u.values[i] = 1.0;
        u
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    fn same_mesh(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.mesh, &other.mesh) || self.mesh == other.mesh {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }

    /// `∫ u' w'`, exact for piecewise linears.
    pub fn v_inner(&self, other: &Self) -> Result<f64> {
        self.same_mesh(other)?;
        Ok(energy_inner(self.mesh.nodes(), &self.values, &other.values))
    }

    /// `(∫ u'²)^{1/2}`.
    pub fn v_norm(&self) -> f64 {
        energy_inner(self.mesh.nodes(), &self.values, &self.values).sqrt()
    }

    /// `alpha * self + other`.
    pub fn axpy(&self, alpha: f64, other: &Self) -> Result<Self> {
        self.same_mesh(other)?;
        Ok(Self {
            mesh: Arc::clone(&self.mesh),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(u, w)| alpha * u + w)
                .collect(),
        })
    }
}

/// `Σ_e (Δu Δw) / h_e` with zero boundary values.
pub(crate) fn energy_inner(nodes: &[f64], u: &[f64], w: &[f64]) -> f64 {
    let at = |v: &[f64], i: usize| if i == 0 || i == nodes.len() - 1 { 0.0 } else { v[i - 1] };
    (0..nodes.len() - 1)
        .map(|e| {
            let h = nodes[e + 1] - nodes[e];
            (at(u, e + 1) - at(u, e)) * (at(w, e + 1) - at(w, e)) / h
        })
        .sum()
}
