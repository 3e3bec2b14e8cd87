use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use wls_core::experiments::{
    anisotropy_report, build_reference, convergence_study, ExperimentConfig, REFERENCE_FILE,
};
use wls_core::multiindex::IndexSet;
use wls_core::sampling::SamplingMeasure;
use wls_core::weights::{build_lambda, xi_table, RhoSequence};

#[derive(Parser)]
#[command(name = "wls-lab", version, about = "Weighted least-squares Hermite experiments")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the index set of the n smallest weights.
    BuildSet {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        levels: usize,
        #[arg(long, default_value_t = 1)]
        r: u32,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long)]
        n: usize,
        /// Index set destination; `-` is stdout.
        #[arg(long, default_value = "-")]
        set_out: PathBuf,
        /// CSV of `index,xi,ln_xi`.
        #[arg(long, default_value = "xi.csv")]
        xi_out: PathBuf,
    },
    /// Draw weighted points from the sampling measure of an index set.
    Sample {
        #[arg(long)]
        set: PathBuf,
        #[arg(long = "J", value_name = "J")]
        num_vars: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Destination; `-` is stdout.
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Build and store the reference estimator.
    Reference(RunArgs),
    /// Monte Carlo error table along the n schedule.
    Converge(RunArgs),
    /// Degree maxima and 2-D sections of the index sets.
    Anisotropy {
        #[command(flatten)]
        run: RunArgs,
        /// Sizes to report; defaults to the schedule plus n_ref.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, env = "WLS_LAB_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// Use n_ref = 5000.
    #[arg(long)]
    paper_scale: bool,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        }
        if self.paper_scale {
            cfg = cfg.paper_scale();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn open_output(path: &Path) -> Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(BufWriter::new(io::stdout().lock())));
    }
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(Box::new(BufWriter::new(file)))
}

fn build_set(
    beta: f64,
    levels: usize,
    r: u32,
    tau: f64,
    n: usize,
    set_out: &Path,
    xi_out: &Path,
) -> Result<bool> {
    let rho = RhoSequence::build(beta, levels, r, tau)?;
    let set = build_lambda(n, &rho, rho.len())?;
    let mut out = open_output(set_out)?;
    out.write_all(set.to_text().as_bytes())?;
    out.flush()?;
    let mut xi = open_output(xi_out)?;
    writeln!(xi, "index,xi,ln_xi")?;
    for (nu, w) in xi_table(&set, &rho)? {
        writeln!(xi, "{},{},{}", nu.to_text(), w.value, w.ln_value)?;
    }
    xi.flush()?;
    Ok(true)
}

fn sample(set: &Path, num_vars: usize, m: usize, seed: u64, out: &Path) -> Result<bool> {
    let text = fs::read_to_string(set).with_context(|| format!("reading {}", set.display()))?;
    let set = IndexSet::parse_text(&text)?;
    let measure = SamplingMeasure::new(set, num_vars)?;
    let mut out = open_output(out)?;
    let header: Vec<String> = (1..=num_vars).map(|j| format!("y_{j}")).collect();
    writeln!(out, "{},w", header.join(","))?;
    let mut start = 0;
    while start < m {
        let count = 4096.min(m - start);
        for p in measure.draw_range(seed, start as u64, count) {
            for y in &p.y {
                write!(out, "{y},")?;
            }
            writeln!(out, "{}", p.weight)?;
        }
        start += count;
    }
    out.flush()?;
    Ok(true)
}

fn reference(cfg: &ExperimentConfig) -> Result<bool> {
    let est = build_reference(cfg)?;
    println!(
        "reference: n_ref = {}, m_ref = {}, ||G - I|| = {:.4}, saved to {}",
        cfg.n_ref,
        cfg.reference_budget(),
        est.gram_deviation(),
        cfg.output_dir.join(REFERENCE_FILE).display()
    );
    Ok(true)
}

fn converge(cfg: &ExperimentConfig) -> Result<bool> {
    let table = convergence_study(cfg)?;
    let (csv, dat) = table.write(&cfg.output_dir)?;
    print!("{}", table.to_csv());
    println!("upper-half slope: {:.4}", table.upper_slope());
    println!("full slope: {:.4}", table.full_slope());
    println!("step slopes: {:?}", table.step_slopes());
    println!(
        "reference spread: {:.4e} (must be below {:.4e})",
        table.reference_spread,
        table.smallest_error() / 3.0
    );
    let consistent = table.self_consistent();
    let monotone = table.monotone();
    println!("self-consistent reference: {consistent}");
    println!("monotone trend: {monotone}");
    println!("wrote {} and {}", csv.display(), dat.display());
    Ok(consistent && monotone)
}

fn anisotropy(cfg: &ExperimentConfig, sizes: &[usize]) -> Result<bool> {
    let sizes = if sizes.is_empty() {
        let mut s = cfg.n_schedule.clone();
        if !s.contains(&cfg.n_ref) {
            s.push(cfg.n_ref);
        }
        s
    } else {
        sizes.to_vec()
    };
    if sizes.contains(&0) {
        bail!("sizes must be positive");
    }
    let report = anisotropy_report(cfg, &sizes)?;
    let (maxima, sections) = report.write(&cfg.output_dir)?;
    print!("{}", report.maxima_csv());
    let symmetric = report.same_level_symmetric();
    println!("same-level sections symmetric: {symmetric}");
    println!("wrote {} and {}", maxima.display(), sections.display());
    Ok(symmetric)
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::BuildSet { beta, levels, r, tau, n, set_out, xi_out } => {
            build_set(beta, levels, r, tau, n, &set_out, &xi_out)
        }
        Command::Sample { set, num_vars, m, seed, out } => sample(&set, num_vars, m, seed, &out),
        Command::Reference(args) => reference(&args.load()?),
        Command::Converge(args) => converge(&args.load()?),
        Command::Anisotropy { run, sizes } => anisotropy(&run.load()?, &sizes),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("wls-lab: invariant check failed");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("wls-lab: {err:#}");
            ExitCode::FAILURE
        }
    }
}
