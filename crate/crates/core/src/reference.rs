//! Fine-space reference eigenpairs by a block preconditioned eigensolver
//! (LOBPCG: Rayleigh-Ritz on the span of the current block, the
//! preconditioned residuals and the previous search directions).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::DenseMatrix;
use crate::eigen::{dense_gevp, fix_sign, orthonormalize_with, relative_residual, EigenpairSet, Normalization};
use crate::error::{Error, Result};
use crate::pcg::{pcg_solve_with, Preconditioner};
use crate::sparse::{dot, CsrMatrix};

/// Problems up to this size are solved densely.
const DENSE_LIMIT: usize = 200;

#[derive(Debug, Clone)]
pub struct ReferenceOptions {
    /// Relative residual `||A u - lambda M u|| / ||A u||` required of every
    /// returned pair.
    pub tol: f64,
    pub max_iters: usize,
    /// Extra block columns beyond the requested count.
    pub buffer: usize,
    pub seed: u64,
    /// Largest sparse Cholesky envelope used to precondition; above it the
    /// inner solves fall back to Jacobi PCG.
    pub max_factor_entries: usize,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        ReferenceOptions { tol: 1e-10, max_iters: 500, buffer: 3, seed: 0x5eed, max_factor_entries: 40_000_000 }
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    /// The requested pairs followed by one buffer pair, energy-normalized.
    pub pairs: EigenpairSet,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// The `count` smallest eigenpairs of `A u = lambda M u` plus the next one,
/// normalized so that `u^T A u = 1`.
pub fn reference_eigensolve(a: &CsrMatrix, m: &CsrMatrix, count: usize, tol: f64) -> Result<EigenpairSet> {
    let options = ReferenceOptions { tol, ..ReferenceOptions::default() };
    Ok(reference_eigensolve_with(a, m, count, &options)?.pairs)
}

pub fn reference_eigensolve_with(
    a: &CsrMatrix,
    m: &CsrMatrix,
    count: usize,
    options: &ReferenceOptions,
) -> Result<ReferenceSolution> {
    let n = a.nrows;
    if a.ncols != n || m.nrows != n || m.ncols != n {
        return Err(Error::DimensionMismatch { expected: n, found: m.nrows });
    }
    if count == 0 || count > n {
        return Err(Error::InvalidConfig(format!("eigenpair count {count} outside 1..={n}")));
    }
    let wanted = (count + 1).min(n);
    if n <= DENSE_LIMIT {
        let mut pairs = dense_gevp(&a.to_dense(), &m.to_dense())?;
        pairs.truncate(wanted);
        let pairs = pairs.into_energy_normalized()?;
        let residuals = pairs.residuals(a, m);
        return Ok(ReferenceSolution { pairs, residuals, iterations: 0 });
    }

    let block = (count + options.buffer).max(wanted).min(n / 3);
    let precond = Preconditioner::auto(a, options.max_factor_entries)?;
    let apply_t = |r: &[f64]| -> Result<Vec<f64>> {
        match &precond {
            Preconditioner::Cholesky(chol) => Ok(chol.solve(r)),
            other => Ok(pcg_solve_with(a, r, other, 1e-6, 10_000)?.0),
        }
    };
    let m_apply = |v: &[f64]| m.mul_vec(v);

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let start: Vec<Vec<f64>> = (0..block).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let basis = orthonormalize_with(&start, m_apply, 1e-12)?.columns;
    let mut ritz = rayleigh_ritz(a, m, &basis, block)?;
    let mut previous: Option<Vec<Vec<f64>>> = None;
    let mut residuals = vec![f64::INFINITY; block];

    for iteration in 1..=options.max_iters {
        let mut active = Vec::new();
        for j in 0..block {
            let r: Vec<f64> = ritz.ax[j].iter().zip(&ritz.mx[j]).map(|(p, q)| p - ritz.values[j] * q).collect();
            residuals[j] = dot(&r, &r).sqrt() / dot(&ritz.ax[j], &ritz.ax[j]).sqrt();
            if residuals[j] > options.tol {
                active.push(r);
            }
        }
        if residuals[..wanted].iter().all(|&r| r <= options.tol) {
            return finish(a, m, ritz, wanted, iteration - 1);
        }

        let mut columns = ritz.x.clone();
        for r in &active {
            columns.push(apply_t(r)?);
        }
        if let Some(old) = &previous {
            columns.extend(conjugate_directions(m, old, &ritz.x));
        }
        let basis = orthonormalize_with(&columns, m_apply, 1e-10)?.columns;
        previous = Some(ritz.x.clone());
        ritz = rayleigh_ritz(a, m, &basis, block)?;
    }
    let worst = residuals[..wanted].iter().fold(0.0f64, |w, &r| w.max(r));
    Err(Error::NotConverged { iterations: options.max_iters, residual: worst })
}

struct Ritz {
    values: Vec<f64>,
    x: Vec<Vec<f64>>,
    ax: Vec<Vec<f64>>,
    mx: Vec<Vec<f64>>,
}

fn rayleigh_ritz(a: &CsrMatrix, m: &CsrMatrix, basis: &[Vec<f64>], keep: usize) -> Result<Ritz> {
    let k = basis.len();
    let ab: Vec<Vec<f64>> = basis.iter().map(|v| a.mul_vec(v)).collect();
    let mb: Vec<Vec<f64>> = basis.iter().map(|v| m.mul_vec(v)).collect();
    let mut ga = DenseMatrix::zeros(k, k);
    let mut gm = DenseMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            ga[(i, j)] = dot(&basis[i], &ab[j]);
            gm[(i, j)] = dot(&basis[i], &mb[j]);
        }
    }
    ga.symmetrize();
    gm.symmetrize();
    let small = dense_gevp(&ga, &gm)?;
    let keep = keep.min(k);
    let combine = |family: &[Vec<f64>], c: &[f64]| {
        let mut out = vec![0.0; family[0].len()];
        for (v, &ci) in family.iter().zip(c) {
            for (o, vi) in out.iter_mut().zip(v) {
                *o += ci * vi;
            }
        }
        out
    };
    let mut ritz = Ritz { values: Vec::new(), x: Vec::new(), ax: Vec::new(), mx: Vec::new() };
    for j in 0..keep {
        let c = &small.vectors[j];
        ritz.values.push(small.eigenvalues[j]);
        ritz.x.push(combine(basis, c));
        ritz.ax.push(combine(&ab, c));
        ritz.mx.push(combine(&mb, c));
    }
    Ok(ritz)
}

/// `X_new - X_old (X_old^T M X_new)`: the part of the update outside the
/// previous block.
fn conjugate_directions(m: &CsrMatrix, old: &[Vec<f64>], new: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m_old: Vec<Vec<f64>> = old.iter().map(|v| m.mul_vec(v)).collect();
    new.iter()
        .map(|x| {
            let mut p = x.clone();
            for (o, mo) in old.iter().zip(&m_old) {
                let c = dot(mo, x);
                for (pi, oi) in p.iter_mut().zip(o) {
                    *pi -= c * oi;
                }
            }
            p
        })
        .collect()
}

fn finish(a: &CsrMatrix, m: &CsrMatrix, ritz: Ritz, wanted: usize, iterations: usize) -> Result<ReferenceSolution> {
    let mut vectors: Vec<Vec<f64>> = ritz.x.into_iter().take(wanted).collect();
    for v in &mut vectors {
        fix_sign(v);
    }
    let pairs = EigenpairSet {
        eigenvalues: ritz.values[..wanted].to_vec(),
        vectors,
        normalization: Normalization::Mass,
    }
    .into_energy_normalized()?;
    let residuals = pairs
        .vectors
        .iter()
        .zip(&pairs.eigenvalues)
        .map(|(u, &l)| relative_residual(a, m, u, l))
        .collect();
    Ok(ReferenceSolution { pairs, residuals, iterations })
}
