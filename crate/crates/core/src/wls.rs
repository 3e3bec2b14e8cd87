//! Weighted least squares over `V_h ⊗ P_Λ`.
//!
//! With features `h_i = (H_ν(y^i))_ν` and weights `w^i`, the normal equations
//! are `G V = D` with `G = (1/m) Σ w^i h_i h_iᵀ` and `D = (1/m) Σ w^i h_i u^iᵀ`.
//! The conditioned estimator keeps the solution only when `||G - I||₂ <= 1/2`
//! and is zero otherwise.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fem1d::{energy_inner, FemSolution, Mesh};
use crate::hermite::TensorBasis;
use crate::multiindex::{IndexSet, MultiIndex};
use crate::sampling::WeightedPoint;

/// Spectral-norm threshold of the conditioning gate.
pub const CONDITIONING_THRESHOLD: f64 = 0.5;

/// One observation `(y, w, u_h(y))`.
#[derive(Debug, Clone)]
pub struct Sample {
    pub y: Vec<f64>,
    pub weight: f64,
    pub solution: FemSolution,
}

/// Streaming accumulator for `G` and `D`.
///
/// Batches are folded in the order they are added; the sums are
/// reproducible as long as the batch boundaries are.
pub struct GramAccumulator {
    basis: TensorBasis,
    mesh: Option<Arc<Mesh>>,
    gram: DMatrix<f64>,
    rhs: DMatrix<f64>,
    count: usize,
}

impl GramAccumulator {
    pub fn new(set: &IndexSet) -> Result<Self> {
        let n = set.len();
        Ok(Self {
            basis: TensorBasis::new(set.clone())?,
            mesh: None,
            gram: DMatrix::zeros(n, n),
            rhs: DMatrix::zeros(n, 0),
            count: 0,
        })
    }

    pub fn add_batch(&mut self, samples: &[Sample]) -> Result<()> {
        let Some(first) = samples.first() else {
            return Ok(());
        };
        let mesh = match &self.mesh {
            Some(mesh) => Arc::clone(mesh),
            None => {
                let mesh = Arc::clone(first.solution.mesh());
                self.rhs = DMatrix::zeros(self.basis.len(), mesh.num_dofs());
                self.mesh = Some(Arc::clone(&mesh));
                mesh
            }
        };
        let (n, dofs, b) = (self.basis.len(), mesh.num_dofs(), samples.len());
        // column i holds √w_i h_i and √w_i u_i
        let mut features = DMatrix::<f64>::zeros(n, b);
        let mut values = DMatrix::<f64>::zeros(dofs, b);
        for (i, s) in samples.iter().enumerate() {
            let sol = &s.solution;
            if !(Arc::ptr_eq(sol.mesh(), &mesh) || **sol.mesh() == *mesh) {
                return Err(Error::MeshMismatch);
            }
            let root = s.weight.sqrt();
            let mut col = features.column_mut(i);
            self.basis
                .eval_into(&s.y, col.as_mut_slice())?;
            col *= root;
            values
                .column_mut(i)
                .iter_mut()
                .zip(sol.values())
                .for_each(|(dst, v)| *dst = root * v);
        }
        let features_t = features.transpose();
        let values_t = values.transpose();
        self.gram.gemm(1.0, &features, &features_t, 1.0);
        self.rhs.gemm(1.0, &features, &values_t, 1.0);
        self.count += b;
        Ok(())
    }

    pub fn finish(self) -> Result<GramSystem> {
        let mesh = self.mesh.ok_or(Error::EmptySamples)?;
        let scale = 1.0 / self.count as f64;
        let mut gram = self.gram * scale;
        // the product is symmetric up to rounding; make it exact
        symmetrize(&mut gram);
        let gram_deviation = spectral_deviation(&gram);
        Ok(GramSystem {
            set: self.basis.set().clone(),
            mesh,
            gram,
            rhs: self.rhs * scale,
            gram_deviation,
            samples: self.count,
        })
    }
}

/// `(1/m) Σ w^i h_i h_iᵀ` for bare weighted draws.
pub fn empirical_gram(basis: &TensorBasis, points: &[WeightedPoint]) -> Result<DMatrix<f64>> {
    if points.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut features = DMatrix::<f64>::zeros(basis.len(), points.len());
    for (i, p) in points.iter().enumerate() {
        let mut col = features.column_mut(i);
        basis.eval_into(&p.y, col.as_mut_slice())?;
        col *= p.weight.sqrt();
    }
    let mut gram = &features * features.transpose() / points.len() as f64;
    symmetrize(&mut gram);
    Ok(gram)
}

fn symmetrize(gram: &mut DMatrix<f64>) {
    let n = gram.nrows();
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (gram[(i, j)] + gram[(j, i)]);
            gram[(i, j)] = avg;
            gram[(j, i)] = avg;
        }
    }
}

/// `||G - I||₂` from the full symmetric spectrum.
pub fn spectral_deviation(gram: &DMatrix<f64>) -> f64 {
    let n = gram.nrows();
    let shifted = gram - DMatrix::<f64>::identity(n, n);
    shifted
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
}

#[derive(Debug, Clone)]
pub struct GramSystem {
    set: IndexSet,
    mesh: Arc<Mesh>,
    /// `n × n`.
    pub gram: DMatrix<f64>,
    /// `n × n_h`, one `V_h` row per index.
    pub rhs: DMatrix<f64>,
    pub gram_deviation: f64,
    pub samples: usize,
}

impl GramSystem {
    pub fn set(&self) -> &IndexSet {
        &self.set
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn is_conditioned(&self) -> bool {
        self.gram_deviation <= CONDITIONING_THRESHOLD
    }
}

/// Assembles the normal equations from a list of samples.
pub fn assemble(samples: &[Sample], set: &IndexSet) -> Result<GramSystem> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut acc = GramAccumulator::new(set)?;
    acc.add_batch(samples)?;
    acc.finish()
}

/// Solves the normal equations by Cholesky when the gate passes, otherwise
/// returns the zero estimator.
pub fn estimate(system: &GramSystem) -> Result<WlsEstimator> {
    let n = system.set.len();
    let dofs = system.mesh.num_dofs();
    if !system.is_conditioned() {
        return Ok(WlsEstimator {
            set: system.set.clone(),
            mesh: Arc::clone(&system.mesh),
            coefficients: DMatrix::zeros(dofs, n),
            conditioned: false,
            gram_deviation: system.gram_deviation,
        });
    }
    let chol = Cholesky::new(system.gram.clone())
        .ok_or(Error::CholeskyFailed(system.gram_deviation))?;
    let solution = chol.solve(&system.rhs);
    Ok(WlsEstimator {
        set: system.set.clone(),
        mesh: Arc::clone(&system.mesh),
        coefficients: solution.transpose(),
        conditioned: true,
        gram_deviation: system.gram_deviation,
    })
}

/// `u = Σ_ν v_ν H_ν` with `v_ν ∈ V_h`.
#[derive(Debug, Clone)]
pub struct WlsEstimator {
    set: IndexSet,
    mesh: Arc<Mesh>,
    /// `n_h × n`; column `i` is the coefficient of the `i`-th member.
    coefficients: DMatrix<f64>,
    conditioned: bool,
    gram_deviation: f64,
}

impl WlsEstimator {
    /// Estimator with prescribed coefficients, given as one `FemSolution`
    /// per member of `set`.
    pub fn from_coefficients(set: IndexSet, coefficients: Vec<FemSolution>) -> Result<Self> {
        let first = coefficients.first().ok_or(Error::EmptySamples)?;
        let mesh = Arc::clone(first.mesh());
        if coefficients.len() != set.len() {
            return Err(Error::Config("one coefficient per index is required".into()));
        }
        let mut mat = DMatrix::zeros(mesh.num_dofs(), set.len());
        for (i, c) in coefficients.iter().enumerate() {
            if **c.mesh() != *mesh {
                return Err(Error::MeshMismatch);
            }
            mat.column_mut(i).copy_from_slice(c.values());
        }
        Ok(Self {
            set,
            mesh,
            coefficients: mat,
            conditioned: true,
            gram_deviation: 0.0,
        })
    }

    pub fn zero(set: IndexSet, mesh: &Arc<Mesh>) -> Self {
        Self {
            coefficients: DMatrix::zeros(mesh.num_dofs(), set.len()),
            set,
            mesh: Arc::clone(mesh),
            conditioned: false,
            gram_deviation: f64::INFINITY,
        }
    }

    pub fn set(&self) -> &IndexSet {
        &self.set
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn is_conditioned(&self) -> bool {
        self.conditioned
    }

    pub fn gram_deviation(&self) -> f64 {
        self.gram_deviation
    }

    /// `v_ν`, if `ν` is in the index set.
    pub fn coefficient(&self, nu: &MultiIndex) -> Option<FemSolution> {
        let i = self.set.position(nu)?;
        let values = self.coefficients.column(i).iter().copied().collect();
        Some(FemSolution::from_values(&self.mesh, values).expect("column has n_h entries"))
    }

    pub fn coefficient_matrix(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    /// `Σ_ν v_ν H_ν(y)`.
    pub fn evaluate(&self, y: &[f64]) -> Result<FemSolution> {
        let basis = TensorBasis::new(self.set.clone())?;
        let h = DVector::from_vec(basis.eval(y)?);
        let values = &self.coefficients * h;
        FemSolution::from_values(&self.mesh, values.iter().copied().collect())
    }

    /// `Σ_ν ||v_ν||_V²`, the squared `V₂` norm.
    pub fn norm(&self) -> f64 {
        let nodes = self.mesh.nodes();
        self.coefficients
            .column_iter()
            .map(|c| energy_inner(nodes, c.as_slice(), c.as_slice()))
            .sum::<f64>()
            .sqrt()
    }

    /// Writes the header and the row-major `n × n_h` coefficient matrix as
    /// little-endian `f64`.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let nodes = self.mesh.nodes();
        out.write_all(MAGIC)?;
        out.write_all(&(nodes.len() as u64).to_le_bytes())?;
        for x in nodes {
            out.write_all(&x.to_le_bytes())?;
        }
        out.write_all(&[self.conditioned as u8])?;
        out.write_all(&self.gram_deviation.to_le_bytes())?;
        let text = self.set.to_text();
        out.write_all(&(self.set.len() as u64).to_le_bytes())?;
        out.write_all(&(text.len() as u64).to_le_bytes())?;
        out.write_all(text.as_bytes())?;
        for c in self.coefficients.column_iter() {
            for v in c.iter() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let fmt = |e: std::io::Error| Error::Format(e.to_string());
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(fmt)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let read_u64 = |r: &mut R| -> Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(fmt)?;
            Ok(u64::from_le_bytes(b))
        };
        let read_f64 = |r: &mut R| -> Result<f64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(fmt)?;
            Ok(f64::from_le_bytes(b))
        };
        let node_count = read_u64(&mut input)? as usize;
        let nodes = (0..node_count)
            .map(|_| read_f64(&mut input))
            .collect::<Result<Vec<_>>>()?;
        let mesh = Arc::new(Mesh::from_nodes(nodes)?);
        let mut flag = [0u8; 1];
        input.read_exact(&mut flag).map_err(fmt)?;
        let gram_deviation = read_f64(&mut input)?;
        let n = read_u64(&mut input)? as usize;
        let text_len = read_u64(&mut input)? as usize;
        let mut text = vec![0u8; text_len];
        input.read_exact(&mut text).map_err(fmt)?;
        let text = String::from_utf8(text).map_err(|e| Error::Format(e.to_string()))?;
        let set = IndexSet::parse_text(&text)?;
        if set.len() != n {
            return Err(Error::Format("index count does not match header".into()));
        }
        let dofs = mesh.num_dofs();
        let mut coefficients = DMatrix::zeros(dofs, n);
        for i in 0..n {
            for d in 0..dofs {
                coefficients[(d, i)] = read_f64(&mut input)?;
            }
        }
        Ok(Self {
            set,
            mesh,
            coefficients,
            conditioned: flag[0] != 0,
            gram_deviation,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        self.write_to(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

const MAGIC: &[u8; 8] = b"WLSEST01";

/// `(Σ_ν ||v_ν^a - v_ν^b||_V²)^{1/2}` over the union of both index sets,
/// missing coefficients counting as zero.
pub fn parseval_distance(a: &WlsEstimator, b: &WlsEstimator) -> Result<f64> {
    if !(Arc::ptr_eq(&a.mesh, &b.mesh) || a.mesh == b.mesh) {
        return Err(Error::MeshMismatch);
    }
    let nodes = a.mesh.nodes();
    let mut diff = vec![0.0; a.mesh.num_dofs()];
    let mut total = 0.0;
    for (i, nu) in a.set.iter().enumerate() {
        let ca = a.coefficients.column(i);
        match b.set.position(nu) {
            Some(j) => {
                let cb = b.coefficients.column(j);
                for ((d, x), y) in diff.iter_mut().zip(ca.iter()).zip(cb.iter()) {
                    *d = x - y;
                }
                total += energy_inner(nodes, &diff, &diff);
            }
            None => total += energy_inner(nodes, ca.as_slice(), ca.as_slice()),
        }
    }
    for (j, nu) in b.set.iter().enumerate() {
        if !a.set.contains(nu) {
            let cb = b.coefficients.column(j);
            total += energy_inner(nodes, cb.as_slice(), cb.as_slice());
        }
    }
    Ok(total.sqrt())
}
