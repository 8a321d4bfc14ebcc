//! Command-line experiment driver. Every experiment writes CSV files into the
//! output directory; floats are printed with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

use crate::analysis::{
    continuum_error, continuum_projection, estimate_eta_a, exact_eigenpairs_square, gap_data,
    verify_projection_bounds_with, BoundKind, BoundReport,
};
use crate::assembly::assemble_cr;
use crate::augmented::{AugmentedOptions, AugmentedProblem, IterationReport};
use crate::error::{Error, Result};
use crate::mesh::uniform_mesh;
use crate::reference::{reference_eigensolve_with, ReferenceOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    /// Discretization errors of the k-pair algorithm over a fine mesh ladder.
    Overall,
    /// Per-iteration errors of the k-pair algorithm.
    AlgebraicK,
    /// Per-iteration errors of the single-pair algorithm.
    AlgebraicOne,
    /// Explicit projection bounds on the fine mesh.
    Bounds,
    /// Coarse approximability estimates over a coarse mesh ladder.
    Eta,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Overall => "overall",
            Experiment::AlgebraicK => "algebraic-k",
            Experiment::AlgebraicOne => "algebraic-one",
            Experiment::Bounds => "bounds",
            Experiment::Eta => "eta",
        }
    }
}

/// Mesh sizes are `H = sqrt(2) / coarse_n` and `h = sqrt(2) / fine_n`.
#[derive(Debug, Clone, Parser)]
#[command(name = "cr-augment", version, about = "Crouzeix-Raviart augmented subspace eigenvalue experiments")]
pub struct ExperimentConfig {
    #[arg(long, value_enum)]
    pub experiment: Experiment,
    #[arg(long, default_value_t = 8)]
    pub coarse_n: usize,
    #[arg(long, default_value_t = 128)]
    pub fine_n: usize,
    /// Number of eigenpairs.
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// 1-based target pair of the single-pair algorithm.
    #[arg(long, default_value_t = 1)]
    pub target: usize,
    #[arg(long, default_value_t = 20)]
    pub max_iters: usize,
    /// Stopping tolerance on the projection errors.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
    /// Worker threads for the fine solves; 0 runs serially.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Output directory, created when missing.
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, out: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            experiment,
            coarse_n: 8,
            fine_n: 128,
            k: 4,
            target: 1,
            max_iters: 20,
            tol: 1e-10,
            seed: 0x5eed,
            threads: 0,
            out: out.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.coarse_n == 0 || self.fine_n < self.coarse_n {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= coarse_n <= fine_n, got {} and {}",
                self.coarse_n, self.fine_n
            )));
        }
        if !self.fine_n.is_multiple_of(self.coarse_n) || !(self.fine_n / self.coarse_n).is_power_of_two() {
            return Err(Error::NonNested(format!(
                "fine_n = {} is not a power-of-two multiple of coarse_n = {}",
                self.fine_n, self.coarse_n
            )));
        }
        if self.k == 0 || self.target == 0 {
            return Err(Error::InvalidConfig("k and target must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        Ok(())
    }

    fn options(&self) -> AugmentedOptions {
        AugmentedOptions { max_iters: self.max_iters, tol: self.tol, threads: self.threads, ..AugmentedOptions::default() }
    }

    fn reference_options(&self) -> ReferenceOptions {
        ReferenceOptions { seed: self.seed, ..ReferenceOptions::default() }
    }
}

/// Files written and whether every hard check held.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub passed: bool,
    pub notes: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    config.validate()?;
    fs::create_dir_all(&config.out).map_err(|source| Error::Io { path: config.out.clone(), source })?;
    match config.experiment {
        Experiment::Overall => run_overall(config),
        Experiment::AlgebraicK | Experiment::AlgebraicOne => run_algebraic(config),
        Experiment::Bounds => run_bounds(config),
        Experiment::Eta => run_eta(config),
    }
}

/// `{:.16e}`: 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

fn write_file(path: &Path, contents: &str) -> Result<PathBuf> {
    fs::write(path, contents).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    Ok(path.to_path_buf())
}

pub const ITERATION_HEADER: &str = "ell,i,lambda,err_a,err_b";
pub const RATES_HEADER: &str = "i,rate_a,rate_b";
pub const BOUNDS_HEADER: &str = "mesh_n,i,k,lhs_a,rhs_a,lhs_b,rhs_b,pass";
pub const SINGLE_BOUNDS_HEADER: &str = "mesh_n,i,k,lhs_a,rhs_a,lhs_b,rhs_b,pass,delta,alt_rhs_b";
pub const GAPS_HEADER: &str = "mesh_n,i,k,delta_k_i,realized_at,delta_lambda,delta_cluster";
pub const OVERALL_HEADER: &str = "fine_n,i,lambda,lambda_dir,lambda_exact,eig_err,err_a,err_b";
pub const ETA_HEADER: &str = "coarse_n,fine_n,eta_a,iterations";

/// One row per iteration and tracked pair. `labels[j]` is the 1-based index
/// reported for the `j`-th tracked pair.
pub fn iteration_csv(report: &IterationReport, labels: &[usize]) -> String {
    let mut s = format!("{ITERATION_HEADER}\n");
    for r in &report.records {
        for (j, &label) in labels.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.ell,
                label,
                fmt_float(r.eigenvalues[j]),
                fmt_float(r.err_a[j]),
                fmt_float(r.err_b[j])
            );
        }
    }
    s
}

pub fn rates_csv(report: &IterationReport, labels: &[usize]) -> String {
    let mut s = format!("{RATES_HEADER}\n");
    for (j, &label) in labels.iter().enumerate() {
        let _ = writeln!(s, "{},{},{}", label, fmt_opt(report.rates_a[j]), fmt_opt(report.rates_b[j]));
    }
    s
}

pub fn bounds_csv(report: &BoundReport, kind: BoundKind) -> String {
    let header = match kind {
        BoundKind::FirstK => BOUNDS_HEADER,
        BoundKind::SinglePair => SINGLE_BOUNDS_HEADER,
    };
    let mut s = format!("{header}\n");
    for r in report.rows.iter().filter(|r| r.kind == kind) {
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.mesh_n,
            r.i,
            r.k,
            fmt_float(r.lhs_a),
            fmt_float(r.rhs_a),
            fmt_float(r.lhs_b),
            fmt_float(r.rhs_b),
            if r.pass() { "PASS" } else { "FAIL" }
        );
        if kind == BoundKind::SinglePair {
            let _ = write!(s, ",{},{}", fmt_float(r.delta), fmt_opt(r.alt_rhs_b));
        }
        s.push('\n');
    }
    s
}

pub fn gaps_csv(report: &BoundReport, mesh_n: usize) -> String {
    let mut s = format!("{GAPS_HEADER}\n");
    for g in &report.gaps {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            mesh_n,
            g.i + 1,
            g.k,
            fmt_float(g.delta_k_i),
            g.realized_at + 1,
            fmt_float(g.delta_lambda),
            fmt_float(g.delta_cluster)
        );
    }
    s
}

fn run_algebraic(config: &ExperimentConfig) -> Result<Outcome> {
    let problem = AugmentedProblem::new(&uniform_mesh(config.coarse_n)?, &uniform_mesh(config.fine_n)?)?;
    let (count, labels): (usize, Vec<usize>) = match config.experiment {
        Experiment::AlgebraicK => (config.k, (1..=config.k).collect()),
        _ => (config.target, vec![config.target]),
    };
    let reference = reference_eigensolve_with(problem.a(), problem.m(), count, &config.reference_options())?.pairs;
    let options = config.options();
    let report = match config.experiment {
        Experiment::AlgebraicK => problem.run_algorithm_k(config.k, &options, Some(&reference))?,
        _ => problem.run_algorithm_one(config.target - 1, &options, Some(&reference))?,
    };
    let name = config.experiment.name();
    let files = vec![
        write_file(&config.out.join(format!("{name}.csv")), &iteration_csv(&report, &labels))?,
        write_file(&config.out.join(format!("{name}_rates.csv")), &rates_csv(&report, &labels))?,
    ];
    let mut notes = Vec::new();
    if !report.converged {
        notes.push(format!("tolerance {} not reached in {} iterations", config.tol, report.iterations()));
    }
    if report.switches > 0 {
        notes.push(format!("selected Ritz index changed {} times", report.switches));
    }
    Ok(Outcome { files, passed: true, notes })
}

fn run_bounds(config: &ExperimentConfig) -> Result<Outcome> {
    let mesh = uniform_mesh(config.fine_n)?;
    let system = assemble_cr(&mesh)?;
    let reference =
        reference_eigensolve_with(&system.stiffness, &system.mass, config.k, &config.reference_options())?.pairs;
    let report = verify_projection_bounds_with(&mesh, &system, &reference, config.k, 1e-12)?;
    let files = vec![
        write_file(&config.out.join("bounds.csv"), &bounds_csv(&report, BoundKind::FirstK))?,
        write_file(&config.out.join("bounds_single.csv"), &bounds_csv(&report, BoundKind::SinglePair))?,
        write_file(&config.out.join("gaps.csv"), &gaps_csv(&report, config.fine_n))?,
    ];
    let notes = report
        .rows
        .iter()
        .filter(|r| !r.pass())
        .map(|r| format!("bound violated: {:?} mesh_n={} i={}", r.kind, r.mesh_n, r.i))
        .collect();
    Ok(Outcome { files, passed: report.all_pass(), notes })
}

/// Fine meshes `coarse_n * 2^j` for `j >= 1` up to `fine_n`.
pub fn fine_ladder(coarse_n: usize, fine_n: usize) -> Vec<usize> {
    if fine_n == coarse_n {
        return vec![fine_n];
    }
    std::iter::successors(Some(2 * coarse_n), |n| Some(2 * n)).take_while(|&n| n <= fine_n).collect()
}

/// Eigenvalue errors `|lambda - lambda_exact| / lambda_exact` and continuum
/// eigenfunction errors of the k-pair algorithm's final iterates. The
/// eigenfunction error of a degenerate eigenvalue is measured against the
/// span of the whole computed cluster.
fn run_overall(config: &ExperimentConfig) -> Result<Outcome> {
    let coarse = uniform_mesh(config.coarse_n)?;
    let exact = exact_eigenpairs_square(config.k)?;
    let options = config.options();
    let mut s = format!("{OVERALL_HEADER}\n");
    let mut notes = Vec::new();
    for n in fine_ladder(config.coarse_n, config.fine_n) {
        let fine = uniform_mesh(n)?;
        let problem = AugmentedProblem::new(&coarse, &fine)?;
        let reference = reference_eigensolve_with(problem.a(), problem.m(), config.k, &config.reference_options())?.pairs;
        let report = problem.run_algorithm_k(config.k, &options, Some(&reference))?;
        if !report.converged {
            notes.push(format!("fine_n={n}: tolerance not reached in {} iterations", report.iterations()));
        }
        let gaps = gap_data(&reference, &exact, config.k)?;
        for (i, target) in exact.iter().enumerate() {
            let span: Vec<Vec<f64>> = gaps[i].cluster.iter().map(|&j| report.pairs.vectors[j].clone()).collect();
            let projected = continuum_projection(&fine, &problem.fine, target, &span)?;
            let (err_a, err_b) = continuum_error(&fine, &problem.fine.dofs, &projected, target)?;
            let lambda = report.pairs.eigenvalues[i];
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                n,
                i + 1,
                fmt_float(lambda),
                fmt_float(reference.eigenvalues[i]),
                fmt_float(target.lambda),
                fmt_float((lambda - target.lambda).abs() / target.lambda),
                fmt_float(err_a),
                fmt_float(err_b)
            );
        }
    }
    let files = vec![write_file(&config.out.join("overall.csv"), &s)?];
    Ok(Outcome { files, passed: true, notes })
}

/// Coarse meshes `coarse_n * 2^j` below `fine_n`, or `coarse_n` alone.
fn coarse_ladder(coarse_n: usize, fine_n: usize) -> Vec<usize> {
    let ladder: Vec<usize> =
        std::iter::successors(Some(coarse_n), |n| Some(2 * n)).take_while(|&n| n < fine_n).collect();
    if ladder.is_empty() {
        vec![coarse_n]
    } else {
        ladder
    }
}

fn run_eta(config: &ExperimentConfig) -> Result<Outcome> {
    let fine = uniform_mesh(config.fine_n)?;
    let system = assemble_cr(&fine)?;
    let mut s = format!("{ETA_HEADER}\n");
    for coarse_n in coarse_ladder(config.coarse_n, config.fine_n) {
        let embedding = crate::transfer::p1_to_cr_embedding(&uniform_mesh(coarse_n)?, &fine)?;
        let est = estimate_eta_a(&system.stiffness, &system.mass, &embedding.p, 1000, config.seed)?;
        let _ = writeln!(s, "{},{},{},{}", coarse_n, config.fine_n, fmt_float(est.eta), est.iterations);
    }
    let files = vec![write_file(&config.out.join("eta.csv"), &s)?];
    Ok(Outcome { files, passed: true, notes: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladders() {
        assert_eq!(fine_ladder(8, 128), vec![16, 32, 64, 128]);
        assert_eq!(fine_ladder(8, 8), vec![8]);
        assert_eq!(coarse_ladder(8, 128), vec![8, 16, 32, 64]);
        assert_eq!(coarse_ladder(8, 8), vec![8]);
    }

    #[test]
    fn config_validation() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = ExperimentConfig::new(Experiment::AlgebraicK, dir.path());
        assert!(c.validate().is_ok());
        c.fine_n = 96;
        assert!(matches!(c.validate(), Err(Error::NonNested(_))));
        c.fine_n = 128;
        c.k = 0;
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        c.k = 1;
        c.tol = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn parses_flags() {
        let c = ExperimentConfig::try_parse_from([
            "cr-augment", "--experiment", "algebraic-one", "--coarse-n", "4", "--fine-n", "16", "--target", "4", "--out", "x",
        ])
        .unwrap();
        assert_eq!(c.experiment, Experiment::AlgebraicOne);
        assert_eq!((c.coarse_n, c.fine_n, c.target), (4, 16, 4));
        assert!(ExperimentConfig::try_parse_from(["cr-augment", "--experiment", "spectral"]).is_err());
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, std::f64::consts::PI, 1e-300, 123456.789] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
    }
}
