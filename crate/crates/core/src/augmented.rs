//! Augmented subspace iterations for the CR eigenproblem.
//!
//! The augmented space is `W_H + span{u_1, ..., u_k}`: the coarse conforming
//! P1 space embedded in the fine CR space plus a few fine iterates. The coarse
//! block is represented as `P Z`, where the columns of `Z` are the eigenvectors
//! of the coarse Galerkin pencil `(P^T A P, P^T M P)`, normalized in energy.
//! `P Z` is never formed; everything is computed through `P`, `P^T` and `Z`.
//!
//! [`AugmentedProblem::run_algorithm_k`] approximates the `k` smallest
//! eigenpairs and [`AugmentedProblem::run_algorithm_one`] tracks a single
//! target pair, keeping at every step the Ritz vector with the largest
//! component along the newest iterate.

use crate::analysis::{fit_rate, RATE_FLOOR};
use crate::assembly::{assemble_cr, FeSystem};
use crate::dense::DenseMatrix;
use crate::eigen::{dense_gevp, EigenpairSet, Normalization};
use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::pcg::{LinearSolver, Preconditioner, DEFAULT_MAX_ITERS};
use crate::sparse::{dot, CsrMatrix};
use crate::transfer::{p1_to_cr_embedding, EmbeddingMatrix};

type SolveResult = Result<(Vec<f64>, usize)>;

/// Default relative drop tolerance of the augmented basis.
pub const DEFAULT_DROP_TOL: f64 = 1e-10;

/// Sparse Cholesky envelopes up to this many entries are used for the fine
/// solves; larger problems fall back to Jacobi PCG.
pub const DEFAULT_FACTOR_BUDGET: usize = 40_000_000;

/// The embedded coarse space with its energy-orthonormal eigenbasis.
#[derive(Debug, Clone)]
pub struct CoarseSpace {
    pub p: CsrMatrix,
    /// Column `j` holds the coarse coefficients of the `j`-th coarse
    /// eigenvector.
    pub z: DenseMatrix,
    /// Eigenvalues of the coarse Galerkin pencil, ascending.
    pub eigenvalues: Vec<f64>,
    a_zz: DenseMatrix,
    m_zz: DenseMatrix,
}

impl CoarseSpace {
    pub fn new(p: &CsrMatrix, a: &CsrMatrix, m: &CsrMatrix) -> Result<CoarseSpace> {
        let a_c = a.galerkin(p)?;
        let m_c = m.galerkin(p)?;
        let pairs = dense_gevp(&a_c.to_dense(), &m_c.to_dense())?.into_energy_normalized()?;
        let nc = p.ncols;
        let mut z = DenseMatrix::zeros(nc, nc);
        for (j, v) in pairs.vectors.iter().enumerate() {
            for (r, &x) in v.iter().enumerate() {
                z[(r, j)] = x;
            }
        }
        let zt = z.transpose();
        let gram = |c: &CsrMatrix| {
            let mut cz = DenseMatrix::zeros(nc, nc);
            for j in 0..nc {
                let col = c.mul_vec(&z.column(j));
                for r in 0..nc {
                    cz[(r, j)] = col[r];
                }
            }
            let mut g = zt.matmul(&cz);
            g.symmetrize();
            g
        };
        let (a_zz, m_zz) = (gram(&a_c), gram(&m_c));
        Ok(CoarseSpace { p: p.clone(), z, eigenvalues: pairs.eigenvalues, a_zz, m_zz })
    }

    pub fn dim(&self) -> usize {
        self.z.ncols
    }

    /// Fine coefficients of `P Z y`.
    pub fn lift(&self, y: &[f64]) -> Vec<f64> {
        self.p.mul_vec(&self.z.mul_vec(y))
    }

    /// Fine coefficients of the `j`-th embedded coarse eigenvector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.p.mul_vec(&self.z.column(j))
    }

    /// `Z^T P^T g`: inner products of the coarse block with a fine vector
    /// given as its image `g` under a symmetric matrix.
    pub fn coordinates(&self, g: &[f64]) -> Vec<f64> {
        let pg = self.p.transpose_mul_vec(g);
        let mut out = vec![0.0; self.dim()];
        for (r, &x) in pg.iter().enumerate() {
            for (o, zr) in out.iter_mut().zip(self.z.row(r)) {
                *o += zr * x;
            }
        }
        out
    }
}

/// `V_{H,h} = W_H + span{iterates}`, stored as the coarse block plus the
/// iterates after energy orthogonalization against `W_H` and each other.
#[derive(Debug, Clone)]
pub struct AugmentedBasis {
    pub coarse_dim: usize,
    pub iterate_dim: usize,
    /// Surviving iterate directions, energy-orthonormal and orthogonal to `W_H`.
    pub iterates: Vec<Vec<f64>>,
    a_iterates: Vec<Vec<f64>>,
    m_iterates: Vec<Vec<f64>>,
}

impl AugmentedBasis {
    pub fn dim(&self) -> usize {
        self.coarse_dim + self.iterate_dim
    }

    /// All basis columns as fine vectors, coarse block first.
    pub fn columns(&self, coarse: &CoarseSpace) -> Vec<Vec<f64>> {
        (0..self.coarse_dim).map(|j| coarse.column(j)).chain(self.iterates.iter().cloned()).collect()
    }

    fn lift(&self, coarse: &CoarseSpace, y: &[f64]) -> Vec<f64> {
        let mut u = coarse.lift(&y[..self.coarse_dim]);
        for (q, &c) in self.iterates.iter().zip(&y[self.coarse_dim..]) {
            for (ui, qi) in u.iter_mut().zip(q) {
                *ui += c * qi;
            }
        }
        u
    }

    /// `B^T A v` for the energy inner products of every basis column with `v`.
    fn energy_coordinates(&self, coarse: &CoarseSpace, a: &CsrMatrix, v: &[f64]) -> Vec<f64> {
        let av = a.mul_vec(v);
        let mut h = coarse.coordinates(&av);
        h.extend(self.iterates.iter().map(|q| dot(q, &av)));
        h
    }
}

/// Orthogonalizes `iterates` in energy against the coarse block and each
/// other (two passes). An iterate is dropped when what remains has energy
/// norm below `drop_tol` times its original norm; if every iterate is dropped
/// the basis is the coarse block alone.
pub fn build_augmented_basis(
    coarse: &CoarseSpace,
    iterates: &[Vec<f64>],
    a: &CsrMatrix,
    m: &CsrMatrix,
    drop_tol: f64,
) -> Result<AugmentedBasis> {
    let mut basis = AugmentedBasis {
        coarse_dim: coarse.dim(),
        iterate_dim: 0,
        iterates: Vec::new(),
        a_iterates: Vec::new(),
        m_iterates: Vec::new(),
    };
    for v in iterates {
        if v.len() != a.nrows {
            return Err(Error::DimensionMismatch { expected: a.nrows, found: v.len() });
        }
        let original = a.energy_norm(v);
        if !(original > 0.0) {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            let aw = a.mul_vec(&w);
            let c = coarse.coordinates(&aw);
            let pz = coarse.lift(&c);
            for (wi, pi) in w.iter_mut().zip(&pz) {
                *wi -= pi;
            }
            for (q, aq) in basis.iterates.iter().zip(&basis.a_iterates) {
                let c = dot(aq, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let mut aw = a.mul_vec(&w);
        let norm = dot(&w, &aw).max(0.0).sqrt();
        if norm <= drop_tol * original {
            continue;
        }
        w.iter_mut().for_each(|x| *x /= norm);
        aw.iter_mut().for_each(|x| *x /= norm);
        basis.m_iterates.push(m.mul_vec(&w));
        basis.iterates.push(w);
        basis.a_iterates.push(aw);
    }
    basis.iterate_dim = basis.iterates.len();
    Ok(basis)
}

/// Ritz pairs of the reduced pencil in basis coordinates, energy-normalized.
struct ReducedPairs {
    values: Vec<f64>,
    coords: Vec<Vec<f64>>,
}

fn reduced_pencil(coarse: &CoarseSpace, basis: &AugmentedBasis) -> (DenseMatrix, DenseMatrix) {
    let nc = basis.coarse_dim;
    let d = basis.dim();
    let mut a_red = DenseMatrix::zeros(d, d);
    let mut m_red = DenseMatrix::zeros(d, d);
    for r in 0..nc {
        a_red.row_mut(r)[..nc].copy_from_slice(coarse.a_zz.row(r));
        m_red.row_mut(r)[..nc].copy_from_slice(coarse.m_zz.row(r));
    }
    for j in 0..basis.iterate_dim {
        let cj = nc + j;
        let (ca, cm) = (coarse.coordinates(&basis.a_iterates[j]), coarse.coordinates(&basis.m_iterates[j]));
        for r in 0..nc {
            a_red[(r, cj)] = ca[r];
            a_red[(cj, r)] = ca[r];
            m_red[(r, cj)] = cm[r];
            m_red[(cj, r)] = cm[r];
        }
        for i in 0..basis.iterate_dim {
            a_red[(nc + i, cj)] = dot(&basis.iterates[i], &basis.a_iterates[j]);
            m_red[(nc + i, cj)] = dot(&basis.iterates[i], &basis.m_iterates[j]);
        }
    }
    a_red.symmetrize();
    m_red.symmetrize();
    (a_red, m_red)
}

fn solve_reduced(coarse: &CoarseSpace, basis: &AugmentedBasis) -> Result<ReducedPairs> {
    let (a_red, m_red) = reduced_pencil(coarse, basis);
    let pairs = dense_gevp(&a_red, &m_red)?.into_energy_normalized()?;
    Ok(ReducedPairs { values: pairs.eigenvalues, coords: pairs.vectors })
}

/// Rayleigh-Ritz on the augmented space: the `k` smallest Ritz pairs lifted
/// to fine coefficients with `a_h(u, u) = 1`.
pub fn solve_augmented_gevp(coarse: &CoarseSpace, basis: &AugmentedBasis, k: usize) -> Result<EigenpairSet> {
    if k == 0 || k > basis.dim() {
        return Err(Error::InvalidConfig(format!("requested {k} Ritz pairs from a basis of dimension {}", basis.dim())));
    }
    let reduced = solve_reduced(coarse, basis)?;
    Ok(EigenpairSet {
        eigenvalues: reduced.values[..k].to_vec(),
        vectors: reduced.coords[..k].iter().map(|y| basis.lift(coarse, y)).collect(),
        normalization: Normalization::Energy,
    })
}

/// Solves `A u_hat_i = lambda_i M u_i` for every pair, optionally on several
/// threads. Solves are independent, so the result does not depend on the
/// thread count.
pub fn expansion_solve(
    solver: &LinearSolver<'_>,
    m: &CsrMatrix,
    pairs: &EigenpairSet,
    threads: usize,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let solve_one = |i: usize| -> Result<(Vec<f64>, usize)> {
        let rhs: Vec<f64> = m.mul_vec(&pairs.vectors[i]).iter().map(|x| pairs.eigenvalues[i] * x).collect();
        solver
            .solve(&rhs)
            .map(|(x, stats)| (x, stats.iterations))
            .map_err(|e| Error::SolveFailed { index: i, iteration: 0, source: Box::new(e) })
    };
    let n = pairs.len();
    let results: Vec<Result<(Vec<f64>, usize)>> = if threads <= 1 || n <= 1 {
        (0..n).map(solve_one).collect()
    } else {
        let workers = threads.min(n);
        let mut slots: Vec<Option<SolveResult>> = (0..n).map(|_| None).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let solve_one = &solve_one;
                    scope.spawn(move || (w..n).step_by(workers).map(|i| (i, solve_one(i))).collect::<Vec<_>>())
                })
                .collect();
            for h in handles {
                for (i, r) in h.join().expect("expansion worker panicked") {
                    slots[i] = Some(r);
                }
            }
        });
        slots.into_iter().map(|s| s.expect("every index solved")).collect()
    };
    let mut out = Vec::with_capacity(n);
    let mut iterations = 0;
    for r in results {
        let (x, its) = r?;
        out.push(x);
        iterations += its;
    }
    Ok((out, iterations))
}

/// Index of the pair with the largest `|a_h(u_j, d)| / ||d||_{a,h}`, ties
/// going to the smallest index. The pairs must be energy-normalized.
pub fn select_largest_component(pairs: &EigenpairSet, direction: &[f64], a: &CsrMatrix) -> Result<usize> {
    let ad = a.mul_vec(direction);
    let norm = dot(direction, &ad).max(0.0).sqrt();
    if !(norm > 0.0) {
        return Err(Error::ZeroVector);
    }
    let scores: Vec<f64> = pairs.vectors.iter().map(|u| dot(u, &ad).abs() / norm).collect();
    Ok(argmax_first(&scores))
}

fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (j, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = j;
        }
    }
    best
}

/// Projection errors `(||u - F u||_{a,h}, ||u - F u||_b)` of each reference
/// vector `u`, where `F` is the energy-orthogonal projection onto
/// `span(approx)`.
pub fn spectral_projection_error(
    reference: &[Vec<f64>],
    approx: &[Vec<f64>],
    a: &CsrMatrix,
    m: &CsrMatrix,
) -> Result<Vec<(f64, f64)>> {
    if approx.is_empty() {
        return Err(Error::SingularGram);
    }
    let a_approx: Vec<Vec<f64>> = approx.iter().map(|v| a.mul_vec(v)).collect();
    let k = approx.len();
    let mut g = DenseMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            g[(i, j)] = dot(&approx[i], &a_approx[j]);
        }
    }
    g.symmetrize();
    let chol = crate::dense::Cholesky::factor(&g).map_err(|_| Error::SingularGram)?;
    let diag_ratio = {
        let l = chol.factor_l();
        let d: Vec<f64> = (0..k).map(|i| l[(i, i)] * l[(i, i)] / g[(i, i)]).collect();
        d.iter().fold(f64::INFINITY, |m, &x| m.min(x))
    };
    if !(diag_ratio > 1e-24) {
        return Err(Error::SingularGram);
    }
    reference
        .iter()
        .map(|u| {
            let rhs: Vec<f64> = a_approx.iter().map(|av| dot(av, u)).collect();
            let c = chol.solve(&rhs);
            let mut e = u.clone();
            for (v, &ci) in approx.iter().zip(&c) {
                for (ei, vi) in e.iter_mut().zip(v) {
                    *ei -= ci * vi;
                }
            }
            Ok((a.energy_norm(&e), m.energy_norm(&e)))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct AugmentedOptions {
    pub max_iters: usize,
    /// Stop once every tracked projection error (or, without a reference,
    /// every successive-iterate difference) is at most `tol`.
    pub tol: f64,
    /// Relative residual of the fine linear solves.
    pub solve_tol: f64,
    pub drop_tol: f64,
    /// Worker threads for the fine solves; 0 or 1 runs serially.
    pub threads: usize,
}

impl AugmentedOptions {
    /// Iterations whose energy error is at or below `max(RATE_FLOOR, tol)`
    /// are left out of rate fits.
    pub fn rate_floor(&self) -> f64 {
        RATE_FLOOR.max(self.tol)
    }
}

impl Default for AugmentedOptions {
    fn default() -> Self {
        AugmentedOptions { max_iters: 20, tol: 1e-10, solve_tol: 1e-12, drop_tol: DEFAULT_DROP_TOL, threads: 0 }
    }
}

/// State after iteration `ell` (`ell = 1` is the coarse initial guess).
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub ell: usize,
    pub eigenvalues: Vec<f64>,
    /// Projection errors per tracked reference pair; empty without a
    /// reference.
    pub err_a: Vec<f64>,
    pub err_b: Vec<f64>,
    /// Largest energy distance of a new iterate from the previous span.
    pub difference: Option<f64>,
    pub basis_dim: usize,
    pub solver_iterations: usize,
    /// Ritz index kept by the single-pair algorithm.
    pub selected: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct IterationReport {
    pub records: Vec<IterationRecord>,
    /// Fitted contraction rate of `err_a` per tracked pair over `ell >= 2`.
    pub rates_a: Vec<Option<f64>>,
    pub rates_b: Vec<Option<f64>>,
    pub converged: bool,
    /// Number of iterations where the single-pair algorithm changed the Ritz
    /// index it keeps.
    pub switches: usize,
    /// Final approximations.
    pub pairs: EigenpairSet,
}

impl IterationReport {
    /// Rates are fitted over `ell >= 2`, up to the first iteration whose
    /// energy error is at or below `floor`; both norms share that window.
    fn new(records: Vec<IterationRecord>, converged: bool, switches: usize, pairs: EigenpairSet, floor: f64) -> Self {
        let tracked = records.first().map_or(0, |r| r.err_a.len());
        let window = |i: usize| records.iter().filter(|r| r.ell >= 2).take_while(move |r| r.err_a[i] > floor);
        let rates_a =
            (0..tracked).map(|i| fit_rate(&window(i).map(|r| r.err_a[i]).collect::<Vec<_>>(), RATE_FLOOR).ok()).collect();
        let rates_b =
            (0..tracked).map(|i| fit_rate(&window(i).map(|r| r.err_b[i]).collect::<Vec<_>>(), RATE_FLOOR).ok()).collect();
        IterationReport { records, rates_a, rates_b, converged, switches, pairs }
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("a report holds at least the initial record")
    }
}

/// A nested coarse/fine pair with every operator the iterations need.
#[derive(Debug, Clone)]
pub struct AugmentedProblem {
    pub fine: FeSystem,
    pub embedding: EmbeddingMatrix,
    pub coarse: CoarseSpace,
    pub preconditioner: Preconditioner,
}

impl AugmentedProblem {
    /// Assembles the fine CR system, the embedding and the coarse eigenbasis.
    /// Fine solves use PCG with a sparse Cholesky preconditioner when it fits
    /// in [`DEFAULT_FACTOR_BUDGET`], and Jacobi otherwise.
    pub fn new(coarse: &TriMesh, fine: &TriMesh) -> Result<Self> {
        let system = assemble_cr(fine)?;
        let embedding = p1_to_cr_embedding(coarse, fine)?;
        let coarse_space = CoarseSpace::new(&embedding.p, &system.stiffness, &system.mass)?;
        let preconditioner = Preconditioner::auto(&system.stiffness, DEFAULT_FACTOR_BUDGET)?;
        Ok(AugmentedProblem { fine: system, embedding, coarse: coarse_space, preconditioner })
    }

    pub fn with_preconditioner(mut self, preconditioner: Preconditioner) -> Self {
        self.preconditioner = preconditioner;
        self
    }

    pub fn a(&self) -> &CsrMatrix {
        &self.fine.stiffness
    }

    pub fn m(&self) -> &CsrMatrix {
        &self.fine.mass
    }

    pub fn solver(&self, tol: f64) -> LinearSolver<'_> {
        LinearSolver::new(self.a(), self.preconditioner.clone(), tol, DEFAULT_MAX_ITERS)
    }

    /// The `k` smallest coarse pairs embedded in the fine space.
    pub fn initial_pairs(&self, k: usize) -> Result<EigenpairSet> {
        if k == 0 || k > self.coarse.dim() {
            return Err(Error::InvalidConfig(format!("k = {k} outside 1..={}", self.coarse.dim())));
        }
        Ok(EigenpairSet {
            eigenvalues: self.coarse.eigenvalues[..k].to_vec(),
            vectors: (0..k).map(|j| self.coarse.column(j)).collect(),
            normalization: Normalization::Energy,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &self,
        ell: usize,
        pairs: &EigenpairSet,
        previous: Option<&EigenpairSet>,
        reference: Option<&[Vec<f64>]>,
        basis_dim: usize,
        solver_iterations: usize,
        selected: Option<usize>,
    ) -> Result<IterationRecord> {
        let (err_a, err_b) = match reference {
            Some(r) => spectral_projection_error(r, &pairs.vectors, self.a(), self.m())?.into_iter().unzip(),
            None => (Vec::new(), Vec::new()),
        };
        let difference = match previous {
            Some(prev) => Some(
                spectral_projection_error(&pairs.vectors, &prev.vectors, self.a(), self.m())?
                    .iter()
                    .fold(0.0f64, |w, &(ea, _)| w.max(ea)),
            ),
            None => None,
        };
        Ok(IterationRecord {
            ell,
            eigenvalues: pairs.eigenvalues.clone(),
            err_a,
            err_b,
            difference,
            basis_dim,
            solver_iterations,
            selected,
        })
    }

    fn done(record: &IterationRecord, tol: f64) -> bool {
        if record.err_a.is_empty() {
            record.difference.is_some_and(|d| d <= tol)
        } else {
            record.err_a.iter().all(|&e| e <= tol)
        }
    }

    /// Approximates the `k` smallest eigenpairs. With a reference, the
    /// projection errors of its first `k` vectors are recorded each
    /// iteration.
    pub fn run_algorithm_k(
        &self,
        k: usize,
        options: &AugmentedOptions,
        reference: Option<&EigenpairSet>,
    ) -> Result<IterationReport> {
        let tracked = tracked_reference(reference, 0..k)?;
        let solver = self.solver(options.solve_tol);
        let mut pairs = self.initial_pairs(k)?;
        let mut records = vec![self.record(1, &pairs, None, tracked.as_deref(), self.coarse.dim(), 0, None)?];
        let mut converged = Self::done(&records[0], options.tol) && tracked.is_some();
        let mut ell = 1;
        while !converged && ell < options.max_iters {
            ell += 1;
            let (expanded, its) = expansion_solve(&solver, self.m(), &pairs, options.threads)
                .map_err(|e| with_iteration(e, ell))?;
            let basis = build_augmented_basis(&self.coarse, &expanded, self.a(), self.m(), options.drop_tol)?;
            if basis.iterate_dim == 0 {
                return Err(Error::DegenerateBasis { iteration: ell });
            }
            let next = solve_augmented_gevp(&self.coarse, &basis, k)?;
            let record = self.record(ell, &next, Some(&pairs), tracked.as_deref(), basis.dim(), its, None)?;
            converged = Self::done(&record, options.tol);
            records.push(record);
            pairs = next;
        }
        Ok(IterationReport::new(records, converged, 0, pairs, options.rate_floor()))
    }

    /// Tracks the eigenpair `target` (0-based) with a single iterate. Each
    /// step keeps the Ritz pair with the largest energy component along the
    /// newest iterate.
    pub fn run_algorithm_one(
        &self,
        target: usize,
        options: &AugmentedOptions,
        reference: Option<&EigenpairSet>,
    ) -> Result<IterationReport> {
        let tracked = tracked_reference(reference, target..target + 1)?;
        let solver = self.solver(options.solve_tol);
        let initial = self.initial_pairs(target + 1)?;
        let mut pair = EigenpairSet {
            eigenvalues: vec![initial.eigenvalues[target]],
            vectors: vec![initial.vectors[target].clone()],
            normalization: Normalization::Energy,
        };
        let mut records =
            vec![self.record(1, &pair, None, tracked.as_deref(), self.coarse.dim(), 0, Some(target))?];
        let mut converged = Self::done(&records[0], options.tol) && tracked.is_some();
        let mut switches = 0;
        let mut selected = target;
        let mut ell = 1;
        while !converged && ell < options.max_iters {
            ell += 1;
            let (expanded, its) =
                expansion_solve(&solver, self.m(), &pair, options.threads).map_err(|e| with_iteration(e, ell))?;
            let basis = build_augmented_basis(&self.coarse, &expanded, self.a(), self.m(), options.drop_tol)?;
            if basis.iterate_dim == 0 {
                return Err(Error::DegenerateBasis { iteration: ell });
            }
            let reduced = solve_reduced(&self.coarse, &basis)?;
            let h = basis.energy_coordinates(&self.coarse, self.a(), &expanded[0]);
            let scores: Vec<f64> = reduced.coords.iter().map(|y| dot(y, &h).abs()).collect();
            let j = argmax_first(&scores);
            if j != selected {
                switches += usize::from(ell > 2);
                selected = j;
            }
            let next = EigenpairSet {
                eigenvalues: vec![reduced.values[j]],
                vectors: vec![basis.lift(&self.coarse, &reduced.coords[j])],
                normalization: Normalization::Energy,
            };
            let record = self.record(ell, &next, Some(&pair), tracked.as_deref(), basis.dim(), its, Some(j))?;
            converged = Self::done(&record, options.tol);
            records.push(record);
            pair = next;
        }
        Ok(IterationReport::new(records, converged, switches, pair, options.rate_floor()))
    }
}

fn tracked_reference(reference: Option<&EigenpairSet>, range: std::ops::Range<usize>) -> Result<Option<Vec<Vec<f64>>>> {
    match reference {
        None => Ok(None),
        Some(r) if r.len() < range.end => Err(Error::InsufficientBuffer { available: r.len(), required: range.end }),
        Some(r) => Ok(Some(r.vectors[range].to_vec())),
    }
}

fn with_iteration(e: Error, ell: usize) -> Error {
    match e {
        Error::SolveFailed { index, source, .. } => Error::SolveFailed { index, iteration: ell, source },
        other => other,
    }
}

/// Algorithm for the `k` smallest pairs on a nested mesh pair.
pub fn run_algorithm_k(
    coarse: &TriMesh,
    fine: &TriMesh,
    k: usize,
    max_iters: usize,
    tol: f64,
    reference: Option<&EigenpairSet>,
) -> Result<IterationReport> {
    let options = AugmentedOptions { max_iters, tol, ..AugmentedOptions::default() };
    AugmentedProblem::new(coarse, fine)?.run_algorithm_k(k, &options, reference)
}

/// Single-pair algorithm for the pair `target_index` (0-based).
pub fn run_algorithm_one(
    coarse: &TriMesh,
    fine: &TriMesh,
    target_index: usize,
    max_iters: usize,
    tol: f64,
    reference: Option<&EigenpairSet>,
) -> Result<IterationReport> {
    let options = AugmentedOptions { max_iters, tol, ..AugmentedOptions::default() };
    AugmentedProblem::new(coarse, fine)?.run_algorithm_one(target_index, &options, reference)
}
