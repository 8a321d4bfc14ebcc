//! Exact Laplace eigenpairs of the unit square, continuum error norms, the
//! finite element projection, the explicit projection bounds, the coarse
//! approximability estimator and rate fitting.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{assemble_cr, barycentric_gradients, cr_load_vector, local_cr_coefficients, DofMap, DofVector, FeSystem};
use crate::dense::{Cholesky, DenseMatrix};
use crate::eigen::EigenpairSet;
use crate::envelope::EnvelopeCholesky;
use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh};
use crate::pcg::{LinearSolver, Preconditioner, DEFAULT_MAX_ITERS};
use crate::quadrature::{barycentric_to_point, triangle_area, TriangleRule};
use crate::sparse::{dot, CsrMatrix};

/// Errors below this are treated as stagnated when fitting rates.
pub const RATE_FLOOR: f64 = 1e3 * f64::EPSILON;

/// Quadrature degree for loads and error integrals.
pub const QUAD_DEGREE: usize = 4;

/// `u(x, y) = c sin(m pi x) sin(n pi y)` with `lambda = (m^2 + n^2) pi^2` and
/// `c = 2 / sqrt(lambda)`, so that `a(u, u) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuumEigenpair {
    pub m: u32,
    pub n: u32,
    pub lambda: f64,
    pub amplitude: f64,
}

impl ContinuumEigenpair {
    pub fn new(m: u32, n: u32) -> Self {
        let lambda = f64::from(m * m + n * n) * PI * PI;
        ContinuumEigenpair { m, n, lambda, amplitude: 2.0 / lambda.sqrt() }
    }

    pub fn value(&self, p: Point) -> f64 {
        let (mx, ny) = (f64::from(self.m) * PI * p[0], f64::from(self.n) * PI * p[1]);
        self.amplitude * mx.sin() * ny.sin()
    }

    pub fn gradient(&self, p: Point) -> [f64; 2] {
        let (fm, fn_) = (f64::from(self.m) * PI, f64::from(self.n) * PI);
        let (mx, ny) = (fm * p[0], fn_ * p[1]);
        [self.amplitude * fm * mx.cos() * ny.sin(), self.amplitude * fn_ * mx.sin() * ny.cos()]
    }

    /// `||u||_b = lambda^{-1/2}`.
    pub fn b_norm(&self) -> f64 {
        1.0 / self.lambda.sqrt()
    }
}

/// The `count` smallest eigenpairs, sorted by eigenvalue and then by `(m, n)`.
pub fn exact_eigenpairs_square(count: usize) -> Result<Vec<ContinuumEigenpair>> {
    if count == 0 {
        return Err(Error::InvalidConfig("eigenpair count must be positive".into()));
    }
    let bound = count as u32 + 1;
    let mut pairs: Vec<ContinuumEigenpair> =
        (1..=bound).flat_map(|m| (1..=bound).map(move |n| ContinuumEigenpair::new(m, n))).collect();
    pairs.sort_by_key(|p| (p.m * p.m + p.n * p.n, p.m, p.n));
    pairs.truncate(count);
    Ok(pairs)
}

/// Load vector `(u, phi_e)` of an exact eigenfunction.
pub fn eigenfunction_load(mesh: &TriMesh, dofs: &DofMap, pair: &ContinuumEigenpair, degree: usize) -> Result<DofVector> {
    cr_load_vector(mesh, dofs, |p| pair.value(p), degree)
}

/// Finite element projection `x` with `A x = lambda r`, `r` the load of `u`.
/// Returns `(x, r)`.
pub fn fe_projection_with(
    mesh: &TriMesh,
    system: &FeSystem,
    pair: &ContinuumEigenpair,
    solver: &LinearSolver<'_>,
    degree: usize,
) -> Result<(DofVector, DofVector)> {
    let load = eigenfunction_load(mesh, &system.dofs, pair, degree)?;
    let rhs: Vec<f64> = load.iter().map(|v| pair.lambda * v).collect();
    let (x, _) = solver.solve(&rhs)?;
    Ok((x, load))
}

/// Finite element projection of `pair` onto the CR space of `mesh`.
pub fn fe_projection(mesh: &TriMesh, pair: &ContinuumEigenpair, tol: f64) -> Result<DofVector> {
    let system = assemble_cr(mesh)?;
    let solver = LinearSolver::new(&system.stiffness, Preconditioner::jacobi(&system.stiffness)?, tol, DEFAULT_MAX_ITERS);
    Ok(fe_projection_with(mesh, &system, pair, &solver, QUAD_DEGREE)?.0)
}

/// `(||u - u_h||_{a,h}, ||u - u_h||_b)` with the broken gradient, integrated
/// with the degree-4 rule on every triangle.
pub fn continuum_error(mesh: &TriMesh, dofs: &DofMap, coeffs: &[f64], pair: &ContinuumEigenpair) -> Result<(f64, f64)> {
    if coeffs.len() != dofs.len() {
        return Err(Error::DimensionMismatch { expected: dofs.len(), found: coeffs.len() });
    }
    let rule = TriangleRule::with_degree(QUAD_DEGREE)?;
    let (mut ea, mut eb) = (0.0, 0.0);
    for t in 0..mesh.num_triangles() {
        let tri = mesh.triangle_points(t);
        let area = triangle_area(&tri).abs();
        let c = local_cr_coefficients(mesh, dofs, coeffs, t);
        let grad_h = cr_gradient(&tri, &c);
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let p = barycentric_to_point(&tri, l);
            let uh: f64 = (0..3).map(|i| c[i] * (1.0 - 2.0 * l[i])).sum();
            let g = pair.gradient(p);
            ea += w * area * ((g[0] - grad_h[0]).powi(2) + (g[1] - grad_h[1]).powi(2));
            eb += w * area * (pair.value(p) - uh).powi(2);
        }
    }
    Ok((ea.sqrt(), eb.sqrt()))
}

fn cr_gradient(tri: &[Point; 3], c: &[f64; 3]) -> [f64; 2] {
    let g = barycentric_gradients(tri);
    let mut out = [0.0; 2];
    for i in 0..3 {
        out[0] -= 2.0 * c[i] * g[i][0];
        out[1] -= 2.0 * c[i] * g[i][1];
    }
    out
}

/// Broken energy inner products `a_h(u, v_j)` of the exact eigenfunction with
/// each discrete function `v_j`.
pub fn energy_inner_products(
    mesh: &TriMesh,
    dofs: &DofMap,
    pair: &ContinuumEigenpair,
    vectors: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let rule = TriangleRule::with_degree(QUAD_DEGREE)?;
    let mut out = vec![0.0; vectors.len()];
    for t in 0..mesh.num_triangles() {
        let tri = mesh.triangle_points(t);
        let area = triangle_area(&tri).abs();
        let mut mean_grad = [0.0; 2];
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let g = pair.gradient(barycentric_to_point(&tri, l));
            mean_grad[0] += w * area * g[0];
            mean_grad[1] += w * area * g[1];
        }
        for (o, v) in out.iter_mut().zip(vectors) {
            let gh = cr_gradient(&tri, &local_cr_coefficients(mesh, dofs, v, t));
            *o += mean_grad[0] * gh[0] + mean_grad[1] * gh[1];
        }
    }
    Ok(out)
}

/// Coefficients of the `a_h`-orthogonal projection of the exact
/// eigenfunction onto `span(vectors)`.
pub fn continuum_projection(
    mesh: &TriMesh,
    system: &FeSystem,
    pair: &ContinuumEigenpair,
    vectors: &[Vec<f64>],
) -> Result<DofVector> {
    if vectors.is_empty() {
        return Err(Error::SingularGram);
    }
    let rhs = energy_inner_products(mesh, &system.dofs, pair, vectors)?;
    let k = vectors.len();
    let images: Vec<Vec<f64>> = vectors.iter().map(|v| system.stiffness.mul_vec(v)).collect();
    let mut g = DenseMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            g[(i, j)] = dot(&vectors[i], &images[j]);
        }
    }
    g.symmetrize();
    let c = Cholesky::factor(&g).map_err(|_| Error::SingularGram)?.solve(&rhs);
    let mut out = vec![0.0; system.dofs.len()];
    for (v, ci) in vectors.iter().zip(c) {
        for (o, vi) in out.iter_mut().zip(v) {
            *o += ci * vi;
        }
    }
    Ok(out)
}

/// Both sides of `(lambda_j - lambda) b(P_h u, u_j) = lambda b(u - P_h u, u_j)`
/// for one discrete eigenpair `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrangTerm {
    pub j: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Evaluates the identity for every pair of `reference`, with `b(u, .)`
/// realized by the same quadrature as the load of `P_h u`. The residual of
/// each term is `|lhs - rhs|` relative to `|lhs| + |rhs| + lambda ||P_h u||_b
/// ||u_j||_b`; the last term sets the scale when both sides vanish by
/// symmetry.
pub fn strang_terms(
    mesh: &TriMesh,
    system: &FeSystem,
    pair: &ContinuumEigenpair,
    reference: &EigenpairSet,
    solver_tol: f64,
    degree: usize,
) -> Result<Vec<StrangTerm>> {
    let solver = LinearSolver::new(
        &system.stiffness,
        Preconditioner::auto(&system.stiffness, crate::augmented::DEFAULT_FACTOR_BUDGET)?,
        solver_tol,
        DEFAULT_MAX_ITERS,
    );
    let (x, load) = fe_projection_with(mesh, system, pair, &solver, degree)?;
    let mx = system.mass.mul_vec(&x);
    let x_b = dot(&x, &mx).sqrt();
    Ok(reference
        .vectors
        .iter()
        .zip(&reference.eigenvalues)
        .enumerate()
        .map(|(j, (u, &lambda_j))| {
            let b_ph = dot(u, &mx);
            let b_u = dot(u, &load);
            let lhs = (lambda_j - pair.lambda) * b_ph;
            let rhs = pair.lambda * (b_u - b_ph);
            let scale = pair.lambda * x_b * system.mass.energy_norm(u);
            let residual = (lhs - rhs).abs() / (lhs.abs() + rhs.abs() + scale + 1e-300);
            StrangTerm { j, lhs, rhs, residual }
        })
        .collect())
}

/// Largest relative residual of the identity over the reference pairs.
pub fn verify_strang_identity(
    mesh: &TriMesh,
    pair: &ContinuumEigenpair,
    reference: &EigenpairSet,
    solver_tol: f64,
) -> Result<f64> {
    let system = assemble_cr(mesh)?;
    let terms = strang_terms(mesh, &system, pair, reference, solver_tol, QUAD_DEGREE)?;
    Ok(terms.iter().fold(0.0, |m, t| m.max(t.residual)))
}

/// Reciprocal gaps of one target eigenvalue against the discrete spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct GapData {
    /// 0-based target index.
    pub i: usize,
    pub k: usize,
    /// `min_{j > k} |1/lambda_bar_j - 1/lambda_i|` over the available pairs.
    pub delta_k_i: f64,
    /// 0-based index where `delta_k_i` is attained.
    pub realized_at: usize,
    /// `min_{j != i} |1/lambda_bar_j - 1/lambda_i|`.
    pub delta_lambda: f64,
    /// Indices sharing the exact eigenvalue of the target.
    pub cluster: Vec<usize>,
    /// `min_{j outside the cluster} |1/lambda_bar_j - 1/lambda_i|`.
    pub delta_cluster: f64,
    pub mu: f64,
    pub mu_bar: Vec<f64>,
}

impl GapData {
    pub fn is_degenerate(&self) -> bool {
        self.cluster.len() > 1
    }

    /// The gap the single-pair bound uses: the per-vector gap for a simple
    /// eigenvalue and the cluster gap otherwise.
    pub fn effective_delta_lambda(&self) -> f64 {
        if self.is_degenerate() {
            self.delta_cluster
        } else {
            self.delta_lambda
        }
    }
}

/// Gap data for each target `targets[i]` paired with the discrete pair `i`.
pub fn gap_data(reference: &EigenpairSet, targets: &[ContinuumEigenpair], k: usize) -> Result<Vec<GapData>> {
    if reference.len() < k + 1 {
        return Err(Error::InsufficientBuffer { available: reference.len(), required: k + 1 });
    }
    let mu_bar: Vec<f64> = reference.eigenvalues.iter().map(|l| 1.0 / l).collect();
    targets
        .iter()
        .enumerate()
        .map(|(i, target)| {
            let mu = 1.0 / target.lambda;
            let gap = |j: usize| (mu_bar[j] - mu).abs();
            let (realized_at, delta_k_i) = (k..mu_bar.len())
                .map(|j| (j, gap(j)))
                .fold((k, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
            if realized_at != k && i < k {
                return Err(Error::InvalidConfig(format!(
                    "gap for target {i} is attained at index {realized_at}, not at {k}"
                )));
            }
            let cluster: Vec<usize> =
                (0..targets.len()).filter(|&j| targets[j].m * targets[j].m + targets[j].n * targets[j].n
                    == target.m * target.m + target.n * target.n).collect();
            let delta_lambda = (0..mu_bar.len()).filter(|&j| j != i).map(gap).fold(f64::INFINITY, f64::min);
            let delta_cluster =
                (0..mu_bar.len()).filter(|j| !cluster.contains(j)).map(gap).fold(f64::INFINITY, f64::min);
            Ok(GapData { i, k, delta_k_i, realized_at, delta_lambda, cluster, delta_cluster, mu, mu_bar: mu_bar.clone() })
        })
        .collect()
}

/// Which explicit bound a row checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// Projection onto the first `k` discrete eigenvectors.
    FirstK,
    /// Projection onto the discrete eigenvector (or degenerate eigenspace)
    /// closest to the target.
    SinglePair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub kind: BoundKind,
    pub mesh_n: usize,
    /// 1-based target index.
    pub i: usize,
    pub k: usize,
    pub lhs_a: f64,
    pub rhs_a: f64,
    pub lhs_b: f64,
    pub rhs_b: f64,
    /// `||u - P_h u||_{a,h}` and `||u - P_h u||_b`.
    pub proj_err_a: f64,
    pub proj_err_b: f64,
    pub mu_bar: f64,
    pub delta: f64,
    /// Alternative b-norm bound `(2 + mu_bar_{k+1} / delta_{k,i}) ||u - P_h u||_b`
    /// for single-pair rows, logged for comparison.
    pub alt_rhs_b: Option<f64>,
}

impl BoundRow {
    pub fn pass(&self) -> bool {
        self.lhs_a <= self.rhs_a && self.lhs_b <= self.rhs_b
    }
}

#[derive(Debug, Clone)]
pub struct BoundReport {
    pub rows: Vec<BoundRow>,
    pub gaps: Vec<GapData>,
}

impl BoundReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(BoundRow::pass)
    }
}

/// Checks the explicit projection bounds on `uniform_mesh(n)` for the first
/// `k` exact eigenfunctions, both for the projection onto the first `k`
/// discrete eigenvectors and for the single-pair projection. A degenerate
/// exact eigenvalue is handled by projecting onto the whole discrete cluster
/// and measuring the gap to the eigenvalues outside it.
pub fn verify_projection_bounds(mesh: &TriMesh, k: usize, solver_tol: f64) -> Result<BoundReport> {
    let system = assemble_cr(mesh)?;
    let reference = crate::reference::reference_eigensolve(&system.stiffness, &system.mass, k, 1e-10)?;
    verify_projection_bounds_with(mesh, &system, &reference, k, solver_tol)
}

pub fn verify_projection_bounds_with(
    mesh: &TriMesh,
    system: &FeSystem,
    reference: &EigenpairSet,
    k: usize,
    solver_tol: f64,
) -> Result<BoundReport> {
    let targets = exact_eigenpairs_square(k)?;
    let gaps = gap_data(reference, &targets, k)?;
    let solver = LinearSolver::new(
        &system.stiffness,
        Preconditioner::auto(&system.stiffness, crate::augmented::DEFAULT_FACTOR_BUDGET)?,
        solver_tol,
        DEFAULT_MAX_ITERS,
    );
    let first_k = &reference.vectors[..k];
    let mu_bar_next = reference.mu(k);
    let mu_bar_first = reference.mu(0);
    let mut rows = Vec::new();
    for (i, target) in targets.iter().enumerate() {
        let gap = &gaps[i];
        let (ph, _) = fe_projection_with(mesh, system, target, &solver, QUAD_DEGREE)?;
        let (pa, pb) = continuum_error(mesh, &system.dofs, &ph, target)?;

        let f = continuum_projection(mesh, system, target, first_k)?;
        let (lhs_a, lhs_b) = continuum_error(mesh, &system.dofs, &f, target)?;
        let ratio = mu_bar_next / gap.delta_k_i;
        rows.push(BoundRow {
            kind: BoundKind::FirstK,
            mesh_n: mesh.n,
            i: i + 1,
            k,
            lhs_a,
            rhs_a: 2.0 * pa + mu_bar_next.sqrt() / gap.delta_k_i * pb,
            lhs_b,
            rhs_b: (2.0 + ratio) * pb,
            proj_err_a: pa,
            proj_err_b: pb,
            mu_bar: mu_bar_next,
            delta: gap.delta_k_i,
            alt_rhs_b: None,
        });

        let span: Vec<Vec<f64>> = gap.cluster.iter().map(|&j| reference.vectors[j].clone()).collect();
        let e = continuum_projection(mesh, system, target, &span)?;
        let (lhs_a, lhs_b) = continuum_error(mesh, &system.dofs, &e, target)?;
        let delta = gap.effective_delta_lambda();
        rows.push(BoundRow {
            kind: BoundKind::SinglePair,
            mesh_n: mesh.n,
            i: i + 1,
            k,
            lhs_a,
            rhs_a: 2.0 * pa + mu_bar_first.sqrt() / delta * pb,
            lhs_b,
            rhs_b: (2.0 + mu_bar_first / delta) * pb,
            proj_err_a: pa,
            proj_err_b: pb,
            mu_bar: mu_bar_first,
            delta,
            alt_rhs_b: Some((2.0 + ratio) * pb),
        });
    }
    Ok(BoundReport { rows, gaps })
}

/// Power iteration estimate of `eta_a(W_H)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaEstimate {
    pub eta: f64,
    pub iterations: usize,
}

/// Estimates `eta_a(W_H) = sup_f ||(I - Q) T_h f||_{a,h} / ||f||_b`, where
/// `T_h f = A^{-1} M f` and `Q` is the energy projection onto `range(P)`.
/// With `S = A^{-1} - P (P^T A P)^{-1} P^T` one has `(I - Q) T_h = S M` and
/// `||S M f||_{a,h}^2 = f^T M S M f`, so `eta^2` is the largest eigenvalue of
/// `S M` in the `M` inner product, found by power iteration.
pub fn estimate_eta_a(a: &CsrMatrix, m: &CsrMatrix, p: &CsrMatrix, iters: usize, seed: u64) -> Result<EtaEstimate> {
    let fine = Preconditioner::auto(a, crate::augmented::DEFAULT_FACTOR_BUDGET)?;
    let solver = LinearSolver::new(a, fine, 1e-12, DEFAULT_MAX_ITERS);
    let coarse = EnvelopeCholesky::factor(&a.galerkin(p)?)?;
    let apply_s = |g: &[f64]| -> Result<Vec<f64>> {
        let (mut x, _) = solver.solve(g)?;
        let c = coarse.solve(&p.transpose_mul_vec(g));
        for (xi, pc) in x.iter_mut().zip(p.mul_vec(&c)) {
            *xi -= pc;
        }
        Ok(x)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f: Vec<f64> = (0..a.nrows).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let normalize = |f: &mut Vec<f64>| {
        let nrm = m.energy_norm(f);
        f.iter_mut().for_each(|x| *x /= nrm);
    };
    normalize(&mut f);
    let scale = {
        let mf = m.mul_vec(&f);
        dot(&mf, &solver.solve(&mf)?.0)
    };
    let mut rho = 0.0;
    let mut previous = f64::INFINITY;
    for iteration in 1..=iters {
        let mf = m.mul_vec(&f);
        let next = apply_s(&mf)?;
        rho = dot(&mf, &next).max(0.0);
        if rho <= 1e-20 * scale {
            return Ok(EtaEstimate { eta: rho.sqrt(), iterations: iteration });
        }
        if (rho - previous).abs() <= 1e-6 * rho {
            return Ok(EtaEstimate { eta: rho.sqrt(), iterations: iteration });
        }
        previous = rho;
        f = next;
        normalize(&mut f);
    }
    Err(Error::NotConverged { iterations: iters, residual: (rho - previous).abs() / rho })
}

/// `v^T A v / v^T M v`.
pub fn rayleigh_quotient(a: &CsrMatrix, m: &CsrMatrix, v: &[f64]) -> Result<f64> {
    let den = m.inner(v, v);
    if !(den > 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(a.inner(v, v) / den)
}

/// Geometric mean of the successive ratios `e[l+1] / e[l]` over the entries
/// above `floor`. At least three such entries are required.
pub fn fit_rate(errors: &[f64], floor: f64) -> Result<f64> {
    let admissible: Vec<f64> = errors.iter().copied().take_while(|&e| e > floor).collect();
    if admissible.len() < 3 {
        return Err(Error::TooFewSamples { available: admissible.len(), required: 3 });
    }
    let log_sum: f64 = admissible.windows(2).map(|w| (w[1] / w[0]).ln()).sum();
    Ok((log_sum / (admissible.len() - 1) as f64).exp())
}
