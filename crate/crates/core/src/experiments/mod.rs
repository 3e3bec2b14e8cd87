//! Reference-estimator protocol, Monte Carlo error tables and index-set
//! reports for the Brownian-bridge diffusion problem.

mod anisotropy;
mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

pub use anisotropy::{anisotropy_report, AnisotropyReport, AnisotropyRow, Section, PROBE_POSITIONS};
pub use config::{ceil_ln, kappa, BudgetRule, ExperimentConfig};

use crate::error::{Error, Result};
use crate::fem1d::{solve, Forcing, Mesh};
use crate::field::SchauderField;
use crate::multiindex::IndexSet;
use crate::rng::derive_seed;
use crate::sampling::SamplingMeasure;
use crate::weights::{build_lambda, RhoSequence};
use crate::wls::{estimate, parseval_distance, GramAccumulator, Sample, WlsEstimator};

/// Samples per assembly batch. Fixed so that the summation order of the
/// normal equations does not depend on the thread count.
pub const BATCH_SIZE: usize = 2048;

/// Field, ρ-sequence, mesh and forcing shared by every estimator of a run.
#[derive(Debug, Clone)]
pub struct Problem {
    pub field: SchauderField,
    pub rho: RhoSequence,
    pub mesh: Arc<Mesh>,
    pub forcing: Forcing,
}

impl Problem {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            field: SchauderField::new(cfg.levels as usize, cfg.tau)?,
            rho: RhoSequence::build(cfg.beta, cfg.levels as usize, cfg.r, cfg.tau)?,
            mesh: Arc::new(Mesh::uniform_dyadic(cfg.mesh_exponent)?),
            forcing: cfg.forcing(),
        })
    }

    /// `J = 2^{L+1} - 1`.
    pub fn num_vars(&self) -> usize {
        self.field.num_functions()
    }

    pub fn index_set(&self, n: usize) -> Result<IndexSet> {
        build_lambda(n, &self.rho, self.num_vars())
    }

    /// Weighted least-squares estimator on `set` from `m` draws of run `seed`.
    pub fn fit(&self, set: &IndexSet, m: usize, seed: u64) -> Result<WlsEstimator> {
        if m == 0 {
            return Err(Error::EmptySamples);
        }
        let measure = SamplingMeasure::new(set.clone(), self.num_vars())?;
        let mut acc = GramAccumulator::new(set)?;
        let mut start = 0;
        while start < m {
            let count = BATCH_SIZE.min(m - start);
            let samples = measure
                .draw_range(seed, start as u64, count)
                .into_par_iter()
                .map(|p| {
                    let solution = solve(&self.field, &p.y, &self.forcing, &self.mesh)?;
                    Ok(Sample {
                        y: p.y,
                        weight: p.weight,
                        solution,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            acc.add_batch(&samples)?;
            start += count;
        }
        estimate(&acc.finish()?)
    }
}

pub const REFERENCE_FILE: &str = "reference.bin";

fn reference_seed(cfg: &ExperimentConfig, replica: u64) -> u64 {
    derive_seed(cfg.seed, "reference", replica, 0)
}

/// Reference estimator on `Λ_{n_ref}` with `m_ref` samples, from the
/// independent stream `replica`.
pub fn reference_estimator(cfg: &ExperimentConfig, problem: &Problem, replica: u64) -> Result<WlsEstimator> {
    let set = problem.index_set(cfg.n_ref)?;
    let est = problem.fit(&set, cfg.reference_budget(), reference_seed(cfg, replica))?;
    if !est.is_conditioned() {
        return Err(Error::UnconditionedReference(est.gram_deviation()));
    }
    Ok(est)
}

/// Builds the reference and stores it under the output directory.
pub fn build_reference(cfg: &ExperimentConfig) -> Result<WlsEstimator> {
    let problem = Problem::new(cfg)?;
    let est = reference_estimator(cfg, &problem, 0)?;
    create_dir(&cfg.output_dir)?;
    est.save(&cfg.output_dir.join(REFERENCE_FILE))?;
    Ok(est)
}

/// Loads the stored reference if it matches the configuration, otherwise
/// builds a fresh one.
pub fn load_or_build_reference(cfg: &ExperimentConfig, problem: &Problem) -> Result<WlsEstimator> {
    let path = cfg.output_dir.join(REFERENCE_FILE);
    if path.exists() {
        let est = WlsEstimator::load(&path)?;
        if est.mesh().as_ref() == problem.mesh.as_ref()
            && *est.set() == problem.index_set(cfg.n_ref)?
            && est.is_conditioned()
        {
            return Ok(est);
        }
    }
    let est = reference_estimator(cfg, problem, 0)?;
    create_dir(&cfg.output_dir)?;
    est.save(&path)?;
    Ok(est)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub m: usize,
    pub mean_error: f64,
    pub stderr: f64,
    pub failures: usize,
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub n_ref: usize,
    /// Distance between two independently seeded references.
    pub reference_spread: f64,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

impl ConvergenceTable {
    /// Rows used for slope fits; `n = n_ref` compares the reference space
    /// with itself and is left out.
    pub fn fit_rows(&self) -> Vec<&ConvergenceRow> {
        self.rows.iter().filter(|r| r.n < self.n_ref).collect()
    }

    fn points(rows: &[&ConvergenceRow]) -> Vec<(f64, f64)> {
        rows.iter().map(|r| (r.n as f64, r.mean_error)).collect()
    }

    /// Slope over the upper half of the schedule, `⌈k/2⌉` points.
    pub fn upper_slope(&self) -> f64 {
        let rows = self.fit_rows();
        let half = rows.len().div_ceil(2);
        loglog_slope(&Self::points(&rows[rows.len() - half..]))
    }

    /// Slope over the whole schedule.
    pub fn full_slope(&self) -> f64 {
        loglog_slope(&Self::points(&self.fit_rows()))
    }

    /// Log-log slopes between consecutive schedule points.
    pub fn step_slopes(&self) -> Vec<f64> {
        let rows = self.fit_rows();
        rows.windows(2)
            .map(|w| loglog_slope(&Self::points(w)))
            .collect()
    }

    /// Spread `max - min` of the step slopes.
    pub fn staircase_spread(&self) -> f64 {
        let steps = self.step_slopes();
        let max = steps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = steps.iter().cloned().fold(f64::INFINITY, f64::min);
        if steps.is_empty() { 0.0 } else { max - min }
    }

    pub fn smallest_error(&self) -> f64 {
        self.rows.iter().map(|r| r.mean_error).fold(f64::INFINITY, f64::min)
    }

    /// Reference spread below a third of the smallest reported error.
    pub fn self_consistent(&self) -> bool {
        self.reference_spread < self.smallest_error() / 3.0
    }

    /// Means non-increasing up to two combined standard errors.
    pub fn monotone(&self) -> bool {
        self.rows.windows(2).all(|w| {
            let slack = 2.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
            w[1].mean_error <= w[0].mean_error + slack
        })
    }

    pub fn total_failures(&self) -> usize {
        self.rows.iter().map(|r| r.failures).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,m,mean_error,stderr,failures\n");
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{}", r.n, r.m, r.mean_error, r.stderr, r.failures).unwrap();
        }
        out
    }

    /// Whitespace-separated columns for log-log plotting.
    pub fn to_dat(&self) -> String {
        let mut out = String::from("# n mean_error stderr\n");
        for r in &self.rows {
            writeln!(out, "{} {} {}", r.n, r.mean_error, r.stderr).unwrap();
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        create_dir(dir)?;
        let csv = dir.join("convergence.csv");
        let dat = dir.join("convergence.dat");
        write_file(&csv, &self.to_csv())?;
        write_file(&dat, &self.to_dat())?;
        Ok((csv, dat))
    }
}

/// Monte Carlo error `E||u_ref - u_n^C||` for every `n` of the schedule.
pub fn convergence_study(cfg: &ExperimentConfig) -> Result<ConvergenceTable> {
    let problem = Problem::new(cfg)?;
    let reference = load_or_build_reference(cfg, &problem)?;
    let second = reference_estimator(cfg, &problem, 1)?;
    let reference_spread = parseval_distance(&reference, &second)?;
    let rows = cfg
        .n_schedule
        .iter()
        .map(|&n| convergence_row(cfg, &problem, &reference, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable {
        rows,
        n_ref: cfg.n_ref,
        reference_spread,
    })
}

fn convergence_row(
    cfg: &ExperimentConfig,
    problem: &Problem,
    reference: &WlsEstimator,
    n: usize,
) -> Result<ConvergenceRow> {
    let set = problem.index_set(n)?;
    let m = cfg.budget(n);
    let mut errors = Vec::with_capacity(cfg.mc_repetitions);
    let mut failures = 0;
    for rep in 0..cfg.mc_repetitions {
        let context = |source| Error::Trial {
            n,
            repetition: rep,
            source: Box::new(source),
        };
        let seed = derive_seed(cfg.seed, "trial", n as u64, rep as u64);
        let est = problem.fit(&set, m, seed).map_err(context)?;
        if !est.is_conditioned() {
            failures += 1;
        }
        errors.push(parseval_distance(&est, reference).map_err(context)?);
    }
    let k = errors.len() as f64;
    let mean_error = errors.iter().sum::<f64>() / k;
    let stderr = if errors.len() > 1 {
        let var = errors.iter().map(|e| (e - mean_error).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    } else {
        0.0
    };
    Ok(ConvergenceRow {
        n,
        m,
        mean_error,
        stderr,
        failures,
        errors,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
