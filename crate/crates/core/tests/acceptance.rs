//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line and then
//! asserts the same condition.

use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use wls_core::experiments::{anisotropy_report, convergence_study, ceil_ln, ConvergenceTable, ExperimentConfig, Problem};
use wls_core::fem1d::{solve, FemSolution, Forcing, Mesh};
use wls_core::field::SchauderField;
use wls_core::hermite::{gauss_hermite, HermiteEvaluator};
use wls_core::multiindex::MultiIndex;
use wls_core::rng::derive_seed;
use wls_core::sampling::{univariate_sampler, SamplingMeasure};
use wls_core::weights::{build_lambda, selection_cmp, RhoSequence};
use wls_core::wls::{assemble, empirical_gram, estimate, spectral_deviation, Sample};

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    println!("criterion {id} [{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

#[test]
fn criterion_1_hermite_orthonormality() {
    let (nodes, weights) = gauss_hermite(32);
    let h = HermiteEvaluator::default();
    let mut worst = 0.0f64;
    for j in 0..=10 {
        for k in 0..=10 {
            let inner: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(&t, &w)| w * h.eval_univariate(j, t).unwrap() * h.eval_univariate(k, t).unwrap())
                .sum();
            let target = if j == k { 1.0 } else { 0.0 };
            worst = worst.max((inner - target).abs());
        }
    }
    verdict(1, "Hermite orthonormality", worst < 1e-10, format!("max deviation {worst:e} (< 1e-10)"));
}

#[test]
fn criterion_2_fem_oracle() {
    let field = SchauderField::new(0, 1.0).unwrap();
    let y = [0.0];
    let exact = 1.0 / 12f64.sqrt();
    let mut nodal_ok = true;
    let mut worst_ratio = 0.0f64;
    let mut points = Vec::new();
    for m in 1..=10u32 {
        let mesh = Arc::new(Mesh::uniform_dyadic(m).unwrap());
        let u = solve(&field, &y, &Forcing::Constant(1.0), &mesh).unwrap();
        // forward error of a solve with condition number ~ n_el²
        let n_el = mesh.num_elements() as f64;
        let bound = f64::EPSILON * n_el * n_el * 0.125;
        for (x, v) in mesh.interior().iter().zip(u.values()) {
            let err = (v - x * (1.0 - x) / 2.0).abs();
            worst_ratio = worst_ratio.max(err / bound);
            nodal_ok &= err <= bound;
        }
        // Galerkin orthogonality: ||u - u_h||² = ||u||² - ||u_h||²
        let v_err = (exact * exact - u.v_norm().powi(2)).max(0.0).sqrt();
        if m >= 2 {
            points.push((n_el.ln(), v_err.ln()));
        }
    }
    let slope = fit(&points);
    let slope_ok = slope <= -0.9 && points.iter().all(|p| p.1.is_finite());
    verdict(
        2,
        "FEM oracle",
        nodal_ok && slope_ok,
        format!("nodal error / (eps n_el^2 max u) <= {worst_ratio:.3}; V-error slope in n_h {slope:.4} (<= -0.9)"),
    );
}

fn fit(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `n` smallest indices of the box `ν_j <= bound` under the selection order.
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
fn criterion_3_index_set_oracle() {
    let mut cases = 0;
    let mut mismatches = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut sequences: Vec<(String, RhoSequence, usize)> = Vec::new();
    for beta in [0.125, 0.25, 0.5, 1.0] {
        sequences.push((format!("beta={beta} L=0"), RhoSequence::build(beta, 0, 1, 1.0).unwrap(), 1));
        sequences.push((format!("beta={beta} L=1"), RhoSequence::build(beta, 1, 1, 1.0).unwrap(), 3));
    }
    for i in 0..6 {
        let vals: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..3.0)).collect();
        for vars in [2, 3] {
            let rho = RhoSequence::from_values(vals[..vars].to_vec(), 1).unwrap();
            sequences.push((format!("random #{i} J={vars}"), rho, vars));
        }
    }
    for (label, rho, vars) in &sequences {
        for n in 1..=30 {
            // every coordinate of the n smallest indices is below n
            let bound = 8.max(n as u32 - 1);
            let got = build_lambda(n, rho, *vars).unwrap();
            let mut want = brute_force(n, rho, *vars, bound);
            let mut have = got.members().to_vec();
            want.sort_by(wls_core::multiindex::canonical_cmp);
            have.sort_by(wls_core::multiindex::canonical_cmp);
            if want != have || !got.is_downward_closed() || got.len() != n {
                mismatches.push(format!("{label} n={n}"));
            }
            cases += 1;
        }
    }
    verdict(
        3,
        "index-set oracle",
        mismatches.is_empty(),
        format!("{cases} cases, mismatches: {mismatches:?}"),
    );
}

fn explicit_hermite(k: usize, t: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => t,
        2 => (t * t - 1.0) / 2f64.sqrt(),
        3 => (t * t * t - 3.0 * t) / 6f64.sqrt(),
        _ => unreachable!(),
    }
}

/// `∫ t² H_k(t)² g(t) dt` by composite Simpson on `[-12, 12]`.
fn second_moment_oracle(k: usize) -> f64 {
    let (a, b, cells) = (-12.0, 12.0, 20_000);
    let h = (b - a) / cells as f64;
    let f = |t: f64| {
        let p = explicit_hermite(k, t);
        t * t * p * p * (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
    };
    let mut sum = f(a) + f(b);
    for i in 1..cells {
        sum += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

#[test]
fn criterion_4_sampler_correctness() {
    const DRAWS: usize = 100_000;
    let ks_threshold = 1.628 / (DRAWS as f64).sqrt();
    let mut pass = true;
    let mut details = Vec::new();
    for k in 0..=3usize {
        let sampler = univariate_sampler(k);
        let mut rng = ChaCha8Rng::seed_from_u64(40 + k as u64);
        let mut xs: Vec<f64> = (0..DRAWS).map(|_| sampler.sample(&mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        let n = DRAWS as f64;
        let ks = xs.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
            let f = sampler.cdf(x);
            d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
        });
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let mean = sq.iter().sum::<f64>() / n;
        let se = (sq.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        let oracle = second_moment_oracle(k);
        let moment_ok = (mean - oracle).abs() <= 3.0 * se;
        let ks_ok = ks < ks_threshold;
        pass &= moment_ok && ks_ok;
        details.push(format!("k={k}: KS {ks:.5} (< {ks_threshold:.5}), E[t^2] {mean:.4} vs {oracle:.4} +- {:.4}", 3.0 * se));
    }
    // the tabulated CDF for k = 0 is the normal CDF
    let normal = Normal::standard();
    let s0 = univariate_sampler(0);
    let table_err = (-60..=60)
        .map(|i| i as f64 / 10.0)
        .fold(0.0f64, |m, t| m.max((s0.cdf(t) - normal.cdf(t)).abs()));
    pass &= table_err < 1e-8;
    details.push(format!("k=0 table vs normal CDF {table_err:e}"));
    verdict(4, "sampler correctness", pass, details.join("; "));
}

#[test]
fn criterion_5_gram_concentration() {
    const TRIALS: u64 = 50;
    let rho = RhoSequence::build(0.5, 6, 1, 1.0).unwrap();
    let mut rates = Vec::new();
    for n in [20usize, 50, 100] {
        let set = build_lambda(n, &rho, rho.len()).unwrap();
        let measure = SamplingMeasure::new(set, rho.len()).unwrap();
        let m = 3 * n * ceil_ln(n);
        let mut failures = 0;
        let mut deviations = Vec::new();
        for trial in 0..TRIALS {
            let points = measure.draw_range(derive_seed(5, "gram", n as u64, trial), 0, m);
            let dev = spectral_deviation(&empirical_gram(measure.basis(), &points).unwrap());
            if dev > 0.5 {
                failures += 1;
            }
            deviations.push(dev);
        }
        deviations.sort_by(f64::total_cmp);
        rates.push((n, m, failures as f64 / TRIALS as f64, deviations[deviations.len() / 2]));
    }
    let detail = rates
        .iter()
        .map(|(n, m, r, med)| format!("n={n} m={m}: failure rate {r:.2}, median ||G-I|| {med:.3}"))
        .collect::<Vec<_>>()
        .join("; ");
    let at_50 = rates.iter().find(|r| r.0 == 50).unwrap().2;
    verdict(5, "Gram concentration", at_50 <= 0.02, format!("{detail} (n=50 needs <= 0.02)"));
}

#[test]
fn criterion_6_polynomial_exact_recovery() {
    let cfg = ExperimentConfig { levels: 3, mesh_exponent: 5, ..Default::default() };
    let problem = Problem::new(&cfg).unwrap();
    let h = HermiteEvaluator::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut conditioned, mut trials, mut worst) = (0, 0, 0.0f64);
    for n in [5usize, 10, 25, 50] {
        let set = problem.index_set(n).unwrap();
        let measure = SamplingMeasure::new(set.clone(), problem.num_vars()).unwrap();
        let coeffs: Vec<FemSolution> = (0..n)
            .map(|_| {
                let vals = (0..problem.mesh.num_dofs()).map(|_| rng.random::<f64>() - 0.5).collect();
                FemSolution::from_values(&problem.mesh, vals).unwrap()
            })
            .collect();
        for factor in [3usize, 10, 30] {
            for seed in 0..4u64 {
                let m = factor * n * ceil_ln(n);
                let samples: Vec<Sample> = measure
                    .draw_range(derive_seed(6, "recovery", n as u64, seed * 100 + factor as u64), 0, m)
                    .into_iter()
                    .map(|p| {
                        let mut u = FemSolution::zero(&problem.mesh);
                        for (nu, c) in set.iter().zip(&coeffs) {
                            u = c.axpy(h.eval_tensor(nu, &p.y).unwrap(), &u).unwrap();
                        }
                        Sample { y: p.y, weight: p.weight, solution: u }
                    })
                    .collect();
                let est = estimate(&assemble(&samples, &set).unwrap()).unwrap();
                trials += 1;
                if !est.is_conditioned() {
                    continue;
                }
                conditioned += 1;
                for (nu, c) in set.iter().zip(&coeffs) {
                    let got = est.coefficient(nu).unwrap();
                    worst = worst.max(got.axpy(-1.0, c).unwrap().v_norm() / c.v_norm());
                }
            }
        }
    }
    verdict(
        6,
        "polynomial exact recovery",
        conditioned > 0 && worst < 1e-8,
        format!("{conditioned}/{trials} conditioned trials, worst relative coefficient error {worst:e} (< 1e-8)"),
    );
}

fn desk_config(beta: f64, dir: &std::path::Path) -> ExperimentConfig {
    ExperimentConfig { beta, output_dir: dir.to_path_buf(), ..Default::default() }
}

fn run_in_pool(threads: usize, cfg: &ExperimentConfig) -> ConvergenceTable {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(|| convergence_study(cfg).unwrap())
}

/// Criterion 7 run for `β = 1/2`, shared with the determinism check.
fn headline_run() -> &'static ConvergenceTable {
    static RUN: OnceLock<ConvergenceTable> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        run_in_pool(4, &desk_config(0.5, dir.path()))
    })
}

fn describe(table: &ConvergenceTable) -> String {
    let rows = table
        .rows
        .iter()
        .map(|r| format!("n={} err={:.4e} fail={}/{}", r.n, r.mean_error, r.failures, r.errors.len()))
        .collect::<Vec<_>>()
        .join(", ");
    format!(
        "[{rows}] reference spread {:.3e}, self-consistent {}, monotone {}",
        table.reference_spread,
        table.self_consistent(),
        table.monotone()
    )
}

#[test]
fn criterion_7_headline_convergence() {
    let half = headline_run();
    let dir = tempfile::tempdir().unwrap();
    let eighth = run_in_pool(4, &desk_config(0.125, dir.path()));
    let upper = half.upper_slope();
    let full = eighth.full_slope();
    let spread = eighth.staircase_spread();
    let pass = upper <= -0.35 && full <= -0.25 && spread >= 0.2;
    verdict(
        7,
        "headline convergence",
        pass,
        format!(
            "beta=1/2 upper-half slope {upper:.4} (<= -0.35) {}; beta=1/8 full slope {full:.4} (<= -0.25), step-slope spread {spread:.4} (>= 0.2) {}",
            describe(half),
            describe(&eighth)
        ),
    );
}

#[test]
fn criterion_8_anisotropy_ordering() {
    let cfg = ExperimentConfig::default();
    let report = anisotropy_report(&cfg, &[1000, 4000]).unwrap();
    let mut pass = report.same_level_symmetric();
    let mut details = Vec::new();
    for row in &report.rows {
        let (coarse, deep) = (row.max_at(1).unwrap(), row.max_at(8).unwrap());
        pass &= coarse > deep;
        details.push(format!("n={}: maxima {:?}", row.n, row.maxima));
    }
    details.push(format!("same-level sections symmetric: {}", report.same_level_symmetric()));
    verdict(8, "anisotropy ordering", pass, details.join("; "));
}

#[test]
fn criterion_9_determinism() {
    let first = headline_run();
    let dir = tempfile::tempdir().unwrap();
    let second = run_in_pool(1, &desk_config(0.5, dir.path()));
    let (a, b) = (first.to_csv(), second.to_csv());
    verdict(
        9,
        "determinism",
        a.as_bytes() == b.as_bytes(),
        format!("4-thread and 1-thread CSVs identical: {} ({} bytes)", a == b, a.len()),
    );
}
