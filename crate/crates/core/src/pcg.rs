//! Preconditioned conjugate gradients for symmetric positive definite systems.

use crate::envelope::EnvelopeCholesky;
use crate::error::{Error, Result};
use crate::sparse::{axpy, dot, norm2, CsrMatrix};

/// Default relative residual tolerance of fine-space solves.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Default iteration cap of fine-space solves.
pub const DEFAULT_MAX_ITERS: usize = 10_000;

/// Approximate inverse applied to residuals inside [`pcg_solve_with`].
#[derive(Debug, Clone)]
pub enum Preconditioner {
    Identity,
    /// Inverse of the diagonal.
    Jacobi(Vec<f64>),
    /// Exact sparse factorization, so PCG finishes in one or two steps.
    Cholesky(EnvelopeCholesky),
    TwoGrid(Box<TwoGrid>),
}

impl Preconditioner {
    pub fn jacobi(a: &CsrMatrix) -> Result<Preconditioner> {
        let inv = a
            .diagonal()
            .iter()
            .enumerate()
            .map(|(row, &d)| if d > 0.0 { Ok(1.0 / d) } else { Err(Error::NotPositiveDefinite { row, pivot: d }) })
            .collect::<Result<_>>()?;
        Ok(Preconditioner::Jacobi(inv))
    }

    pub fn cholesky(a: &CsrMatrix) -> Result<Preconditioner> {
        Ok(Preconditioner::Cholesky(EnvelopeCholesky::factor(a)?))
    }

    pub fn two_grid(a: &CsrMatrix, p: &CsrMatrix) -> Result<Preconditioner> {
        Ok(Preconditioner::TwoGrid(Box::new(TwoGrid::new(a, p)?)))
    }

    /// Sparse Cholesky when its envelope fits in `max_entries` stored values,
    /// otherwise Jacobi.
    pub fn auto(a: &CsrMatrix, max_entries: usize) -> Result<Preconditioner> {
        if EnvelopeCholesky::envelope_size(a) <= max_entries {
            Self::cholesky(a)
        } else {
            Self::jacobi(a)
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preconditioner::Identity => "identity",
            Preconditioner::Jacobi(_) => "jacobi",
            Preconditioner::Cholesky(_) => "cholesky",
            Preconditioner::TwoGrid(_) => "two-grid",
        }
    }

    /// `z = B r`.
    pub fn apply(&self, a: &CsrMatrix, r: &[f64], z: &mut [f64]) {
        match self {
            Preconditioner::Identity => z.copy_from_slice(r),
            Preconditioner::Jacobi(inv) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * di;
                }
            }
            Preconditioner::Cholesky(chol) => {
                z.copy_from_slice(r);
                chol.solve_in_place(z);
            }
            Preconditioner::TwoGrid(tg) => tg.apply(a, r, z),
        }
    }
}

/// Symmetric two-grid cycle: damped Jacobi smoothing around an exact coarse
/// correction through the prolongation `P` and the Galerkin operator
/// `P^T A P`.
#[derive(Debug, Clone)]
pub struct TwoGrid {
    p: CsrMatrix,
    coarse: EnvelopeCholesky,
    inv_diag: Vec<f64>,
    omega: f64,
    sweeps: usize,
}

impl TwoGrid {
    pub fn new(a: &CsrMatrix, p: &CsrMatrix) -> Result<TwoGrid> {
        if p.nrows != a.nrows {
            return Err(Error::DimensionMismatch { expected: a.nrows, found: p.nrows });
        }
        let coarse = EnvelopeCholesky::factor(&a.galerkin(p)?)?;
        let Preconditioner::Jacobi(inv_diag) = Preconditioner::jacobi(a)? else { unreachable!() };
        // Gershgorin bound on the spectrum of D^{-1} A.
        let rho = (0..a.nrows)
            .map(|r| a.row(r).map(|(_, v)| v.abs()).sum::<f64>() * inv_diag[r])
            .fold(0.0, f64::max);
        Ok(TwoGrid { p: p.clone(), coarse, inv_diag, omega: 1.0 / rho, sweeps: 2 })
    }

    fn smooth(&self, a: &CsrMatrix, r: &[f64], x: &mut [f64], scratch: &mut [f64]) {
        for _ in 0..self.sweeps {
            a.mul_vec_into(x, scratch);
            for i in 0..x.len() {
                x[i] += self.omega * self.inv_diag[i] * (r[i] - scratch[i]);
            }
        }
    }

    pub fn apply(&self, a: &CsrMatrix, r: &[f64], z: &mut [f64]) {
        let mut scratch = vec![0.0; r.len()];
        z.iter_mut().for_each(|v| *v = 0.0);
        self.smooth(a, r, z, &mut scratch);
        a.mul_vec_into(z, &mut scratch);
        let defect: Vec<f64> = r.iter().zip(&scratch).map(|(ri, ai)| ri - ai).collect();
        let mut coarse = self.p.transpose_mul_vec(&defect);
        self.coarse.solve_in_place(&mut coarse);
        axpy(1.0, &self.p.mul_vec(&coarse), z);
        self.smooth(a, r, z, &mut scratch);
    }
}

/// Outcome of a converged solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final `||A x - b|| / ||b||`.
    pub relative_residual: f64,
}

/// A preconditioned CG configuration bound to one matrix.
#[derive(Debug, Clone)]
pub struct LinearSolver<'a> {
    pub a: &'a CsrMatrix,
    pub preconditioner: Preconditioner,
    pub tol: f64,
    pub max_iters: usize,
}

impl<'a> LinearSolver<'a> {
    /// Jacobi-preconditioned solver with the default tolerance.
    pub fn jacobi(a: &'a CsrMatrix) -> Result<Self> {
        Ok(LinearSolver { a, preconditioner: Preconditioner::jacobi(a)?, tol: DEFAULT_TOL, max_iters: DEFAULT_MAX_ITERS })
    }

    pub fn new(a: &'a CsrMatrix, preconditioner: Preconditioner, tol: f64, max_iters: usize) -> Self {
        LinearSolver { a, preconditioner, tol, max_iters }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
        pcg_solve_with(self.a, rhs, &self.preconditioner, self.tol, self.max_iters)
    }
}

/// Jacobi-preconditioned CG: returns `x` with `||A x - rhs|| <= tol ||rhs||`.
pub fn pcg_solve(a: &CsrMatrix, rhs: &[f64], tol: f64, max_iters: usize) -> Result<Vec<f64>> {
    Ok(pcg_solve_with(a, rhs, &Preconditioner::jacobi(a)?, tol, max_iters)?.0)
}

/// Preconditioned CG from a zero initial guess. Convergence is declared on
/// the true residual `rhs - A x`, recomputed whenever the recursive residual
/// passes the tolerance.
pub fn pcg_solve_with(
    a: &CsrMatrix,
    rhs: &[f64],
    precond: &Preconditioner,
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.nrows;
    if rhs.len() != n || a.ncols != n {
        return Err(Error::DimensionMismatch { expected: n, found: rhs.len() });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("solver tolerance must be positive, got {tol}")));
    }
    let mut x = vec![0.0; n];
    let b_norm = norm2(rhs);
    if b_norm == 0.0 {
        return Ok((x, SolveStats { iterations: 0, relative_residual: 0.0 }));
    }
    let target = tol * b_norm;
    let mut r = rhs.to_vec();
    let mut z = vec![0.0; n];
    let mut ap = vec![0.0; n];
    precond.apply(a, &r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut r_norm = b_norm;

    for iteration in 1..=max_iters {
        a.mul_vec_into(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            return Err(Error::Indefinite { iteration, curvature });
        }
        let alpha = rz / curvature;
        // CG lowers the energy error by alpha * rz / 2 per step.
        debug_assert!(alpha > 0.0, "energy error must decrease");
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        r_norm = norm2(&r);

        if r_norm <= target {
            a.mul_vec_into(&x, &mut ap);
            for i in 0..n {
                r[i] = rhs[i] - ap[i];
            }
            r_norm = norm2(&r);
            if r_norm <= target {
                return Ok((x, SolveStats { iterations: iteration, relative_residual: r_norm / b_norm }));
            }
            // Recursive residual drifted: restart the search directions.
            precond.apply(a, &r, &mut z);
            rz = dot(&r, &z);
            p.copy_from_slice(&z);
            continue;
        }

        precond.apply(a, &r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged { iterations: max_iters, residual: r_norm / b_norm })
}
