//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
//! exits with a failure status if any criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use cr_augment::analysis::{
    estimate_eta_a, exact_eigenpairs_square, verify_projection_bounds, verify_strang_identity,
};
use cr_augment::assembly::{assemble_cr, assemble_p1, cr_local_stiffness, p1_local_stiffness};
use cr_augment::augmented::{
    build_augmented_basis, solve_augmented_gevp, AugmentedOptions, AugmentedProblem, IterationReport,
    DEFAULT_DROP_TOL,
};
use cr_augment::cli::{run, Experiment, ExperimentConfig};
use cr_augment::eigen::EigenpairSet;
use cr_augment::mesh::uniform_mesh;
use cr_augment::reference::reference_eigensolve;
use cr_augment::transfer::p1_to_cr_embedding;

const FINE_N: usize = 128;
const COARSE_LADDER: [usize; 3] = [8, 16, 32];

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn in_band(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(", ")
}

/// Fine problems for the coarse ladder, sharing one fine reference solve.
struct Ladder {
    problems: Vec<AugmentedProblem>,
    reference: EigenpairSet,
}

fn ladder() -> &'static Ladder {
    static LADDER: OnceLock<Ladder> = OnceLock::new();
    LADDER.get_or_init(|| {
        let fine = uniform_mesh(FINE_N).unwrap();
        let problems: Vec<AugmentedProblem> = COARSE_LADDER
            .iter()
            .map(|&n| AugmentedProblem::new(&uniform_mesh(n).unwrap(), &fine).unwrap())
            .collect();
        let reference = reference_eigensolve(problems[0].a(), problems[0].m(), 4, 1e-10).unwrap();
        Ladder { problems, reference }
    })
}

fn options() -> AugmentedOptions {
    AugmentedOptions { max_iters: 20, tol: 1e-10, ..AugmentedOptions::default() }
}

/// Errors must not grow from one iteration to the next once contraction has
/// started, until they reach the stopping tolerance.
fn monotone(report: &IterationReport, floor: f64) -> bool {
    report.records[1..].windows(2).all(|w| {
        (0..w[0].err_a.len()).all(|i| w[0].err_a[i] <= floor || w[1].err_a[i] <= w[0].err_a[i])
    })
}

fn rate_ladder(reports: &[IterationReport], index: usize) -> Result<(Vec<f64>, Vec<f64>), String> {
    let rates: Vec<f64> = reports
        .iter()
        .map(|r| r.rates_a[index].ok_or_else(|| "too few iterations above the floor to fit a rate".to_string()))
        .collect::<Result<_, _>>()?;
    let ratios = rates.windows(2).map(|w| w[0] / w[1]).collect();
    Ok((rates, ratios))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let sys = assemble_cr(&uniform_mesh(64).unwrap()).map_err(|e| e.to_string())?;
    let pairs = reference_eigensolve(&sys.stiffness, &sys.mass, 4, 1e-10).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let exact = [2.0, 5.0, 5.0, 8.0].map(|c| c * PI * PI);
    let ok = pairs.eigenvalues.iter().zip(exact).all(|(l, e)| *l <= e && (e - l) / e < 0.01) && elapsed < 60.0;
    let scaled: Vec<f64> = pairs.eigenvalues[..4].iter().map(|l| l / (PI * PI)).collect();
    check(ok, format!("lambda / pi^2 = {}; {elapsed:.1} s", fmt_list(&scaled)))
}

fn criterion_2() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = ExperimentConfig { coarse_n: 8, fine_n: 128, k: 4, ..ExperimentConfig::new(Experiment::Overall, dir.path()) };
    run(&config).map_err(|e| e.to_string())?;
    let csv = fs::read_to_string(dir.path().join("overall.csv")).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<String>> =
        csv.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).filter(|r: &Vec<String>| r[1] == "1").collect();
    let column = |c: usize| rows.iter().map(|r| r[c].parse::<f64>().unwrap()).collect::<Vec<_>>();
    let (eig, energy) = (column(5), column(6));
    let ratio = |v: &[f64]| v.windows(2).map(|w| w[0] / w[1]).collect::<Vec<_>>();
    let (re, ra) = (ratio(&eig), ratio(&energy));
    let ok = rows.len() == 4 && re.iter().all(|&r| in_band(r, 3.2, 4.8)) && ra.iter().all(|&r| in_band(r, 1.7, 2.3));
    check(ok, format!("eigenvalue error ratios {}; energy error ratios {}", fmt_list(&re), fmt_list(&ra)))
}

fn criterion_3() -> Outcome {
    let l = ladder();
    let opts = options();
    let reports: Vec<IterationReport> = l
        .problems
        .iter()
        .map(|p| p.run_algorithm_k(1, &opts, Some(&l.reference)))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let (rates, ratios) = rate_ladder(&reports, 0)?;
    let ok = ratios.iter().all(|&r| in_band(r, 2.8, 5.0))
        && in_band(rates[0], 0.02, 0.12)
        && reports.iter().all(|r| monotone(r, opts.rate_floor()));
    check(ok, format!("rates {}; ratios {}", fmt_list(&rates), fmt_list(&ratios)))
}

fn criterion_4() -> Outcome {
    let l = ladder();
    let opts = options();
    let k1 = l.problems[0].run_algorithm_k(1, &opts, Some(&l.reference)).map_err(|e| e.to_string())?;
    let one = l.problems[0].run_algorithm_one(0, &opts, Some(&l.reference)).map_err(|e| e.to_string())?;
    let gap = k1
        .records
        .iter()
        .zip(&one.records)
        .map(|(a, b)| (a.err_a[0] - b.err_a[0]).abs())
        .fold(0.0f64, f64::max);
    let same_length = k1.iterations() == one.iterations();

    let reports: Vec<IterationReport> = l
        .problems
        .iter()
        .map(|p| p.run_algorithm_one(3, &opts, Some(&l.reference)))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let (rates, ratios) = rate_ladder(&reports, 0)?;
    let rates_b: Vec<f64> = reports.iter().filter_map(|r| r.rates_b[0]).collect();
    let ok = same_length
        && gap <= 1e-8
        && ratios.iter().all(|&r| in_band(r, 2.8, 5.0))
        && reports.iter().all(|r| monotone(r, opts.rate_floor()));
    check(
        ok,
        format!(
            "target 1 max |err_a difference| {gap:.2e}; target 4 rates {} (b-norm {}); ratios {}",
            fmt_list(&rates),
            fmt_list(&rates_b),
            fmt_list(&ratios)
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    for n in [16, 32] {
        let mesh = uniform_mesh(n).unwrap();
        let sys = assemble_cr(&mesh).map_err(|e| e.to_string())?;
        let reference = reference_eigensolve(&sys.stiffness, &sys.mass, 4, 1e-10).map_err(|e| e.to_string())?;
        for pair in exact_eigenpairs_square(4).map_err(|e| e.to_string())? {
            worst = worst.max(verify_strang_identity(&mesh, &pair, &reference, 1e-12).map_err(|e| e.to_string())?);
        }
    }
    check(worst <= 1e-8, format!("max relative residual {worst:.2e}"))
}

fn criterion_6() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for n in [16, 32] {
        let report = verify_projection_bounds(&uniform_mesh(n).unwrap(), 4, 1e-12).map_err(|e| e.to_string())?;
        ok &= report.all_pass();
        let slack = report.rows.iter().map(|r| (r.lhs_a / r.rhs_a).max(r.lhs_b / r.rhs_b)).fold(0.0f64, f64::max);
        lines.push(format!("n={n}: {} rows, max lhs/rhs {slack:.3}", report.rows.len()));
    }
    check(ok, lines.join("; "))
}

fn criterion_7() -> Outcome {
    let fine = uniform_mesh(16).unwrap();
    let coarse = uniform_mesh(8).unwrap();
    let cr = assemble_cr(&fine).map_err(|e| e.to_string())?;
    let p1 = assemble_p1(&coarse).map_err(|e| e.to_string())?;
    let mass = &cr.mass;
    let diagonal = (0..mass.nrows).all(|r| mass.row(r).all(|(c, v)| c == r || v == 0.0))
        && mass.diagonal().iter().all(|&d| d > 0.0);

    let mut local = 0.0f64;
    for t in 0..fine.num_triangles() {
        let tri = fine.triangle_points(t);
        let (kc, kp) = (cr_local_stiffness(&tri), p1_local_stiffness(&tri));
        for i in 0..3 {
            for j in 0..3 {
                local = local.max((kc[i][j] - 4.0 * kp[i][j]).abs());
            }
        }
    }

    let emb = p1_to_cr_embedding(&coarse, &fine).map_err(|e| e.to_string())?;
    let mut galerkin = 0.0f64;
    for (f, c) in [(&cr.stiffness, &p1.stiffness), (&cr.mass, &p1.mass)] {
        let g = f.galerkin(&emb.p).map_err(|e| e.to_string())?;
        for r in 0..g.nrows {
            for col in 0..g.ncols {
                galerkin = galerkin.max((g.get(r, col) - c.get(r, col)).abs());
            }
        }
    }
    check(
        diagonal && local <= 1e-13 && galerkin <= 1e-12,
        format!("mass diagonal: {diagonal}; local stiffness gap {local:.1e}; Galerkin gap {galerkin:.1e}"),
    )
}

fn criterion_8() -> Outcome {
    let l = ladder();
    let etas: Vec<f64> = l
        .problems
        .iter()
        .map(|p| estimate_eta_a(p.a(), p.m(), &p.embedding.p, 1000, 0x5eed).map(|e| e.eta))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let ratios: Vec<f64> = etas.windows(2).map(|w| w[0] / w[1]).collect();
    check(ratios.iter().all(|&r| in_band(r, 1.6, 2.6)), format!("eta {}; ratios {}", fmt_list(&etas), fmt_list(&ratios)))
}

fn criterion_9() -> Outcome {
    let p = AugmentedProblem::new(&uniform_mesh(8).unwrap(), &uniform_mesh(64).unwrap()).map_err(|e| e.to_string())?;
    let reference = reference_eigensolve(p.a(), p.m(), 4, 1e-10).map_err(|e| e.to_string())?;
    let basis = build_augmented_basis(&p.coarse, &reference.vectors[..4], p.a(), p.m(), DEFAULT_DROP_TOL)
        .map_err(|e| e.to_string())?;
    let ritz = solve_augmented_gevp(&p.coarse, &basis, 4).map_err(|e| e.to_string())?;
    let worst = ritz
        .eigenvalues
        .iter()
        .zip(&reference.eigenvalues)
        .map(|(r, e)| (r - e).abs() / e)
        .fold(0.0f64, f64::max);
    check(worst <= 1e-10, format!("max relative eigenvalue gap {worst:.2e}"))
}

fn criterion_10() -> Outcome {
    let experiments = [
        Experiment::Overall,
        Experiment::AlgebraicK,
        Experiment::AlgebraicOne,
        Experiment::Bounds,
        Experiment::Eta,
    ];
    let mut compared = 0;
    for experiment in experiments {
        let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
        for dir in &dirs {
            let config =
                ExperimentConfig { coarse_n: 4, fine_n: 16, target: 4, ..ExperimentConfig::new(experiment, dir.path()) };
            run(&config).map_err(|e| e.to_string())?;
        }
        let files = |d: &Path| {
            let mut names: Vec<_> = fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
            names.sort();
            names
        };
        let names = files(dirs[0].path());
        if names != files(dirs[1].path()) {
            return Err(format!("{}: different file sets", experiment.name()));
        }
        for name in names {
            let (a, b) = (fs::read(dirs[0].path().join(&name)).unwrap(), fs::read(dirs[1].path().join(&name)).unwrap());
            if a != b {
                return Err(format!("{}: {} differs between runs", experiment.name(), name.to_string_lossy()));
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} files byte-identical across two runs"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("spectrum identification", criterion_1),
        ("overall orders", criterion_2),
        ("second-order contraction", criterion_3),
        ("single-pair equivalence and rates", criterion_4),
        ("Strang identity", criterion_5),
        ("explicit projection bounds", criterion_6),
        ("structural identities", criterion_7),
        ("eta_a scaling", criterion_8),
        ("projected exactness", criterion_9),
        ("determinism", criterion_10),
    ];
    let outcomes: Vec<Outcome> = std::thread::scope(|scope| {
        let handles: Vec<_> = criteria.iter().map(|&(_, f)| scope.spawn(f)).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err("panicked".to_string())))
            .collect()
    });
    let mut failures = 0;
    for (n, ((name, _), outcome)) in criteria.iter().zip(&outcomes).enumerate() {
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", n + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", n + 1);
            }
        }
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
