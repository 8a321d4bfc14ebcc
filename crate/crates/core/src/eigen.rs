//! Eigenpair containers, the dense generalized eigensolver used for small
//! projected problems, and Gram-Schmidt in an energy inner product.

use crate::dense::{symmetric_eigen, Cholesky, DenseMatrix};
use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, CsrMatrix};

/// Which inner product the eigenvectors are orthonormal in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `x_i^T M x_j = delta_ij`.
    Mass,
    /// `x_i^T A x_j = delta_ij`, i.e. `a_h(u, u) = 1`.
    Energy,
}

/// Ascending eigenvalues with one coefficient vector per eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenpairSet {
    pub eigenvalues: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub normalization: Normalization,
}

impl EigenpairSet {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Reciprocal eigenvalue `mu_i = 1 / lambda_i`.
    pub fn mu(&self, i: usize) -> f64 {
        1.0 / self.eigenvalues[i]
    }

    /// Keeps the `n` smallest pairs.
    pub fn truncate(&mut self, n: usize) {
        self.eigenvalues.truncate(n);
        self.vectors.truncate(n);
    }

    /// Rescales mass-normalized vectors by `1 / sqrt(lambda)` so that
    /// `a_h(u, u) = 1`.
    pub fn into_energy_normalized(mut self) -> Result<Self> {
        if self.normalization == Normalization::Mass {
            for (v, &lambda) in self.vectors.iter_mut().zip(&self.eigenvalues) {
                if !(lambda > 0.0) {
                    return Err(Error::NotPositiveDefinite { row: 0, pivot: lambda });
                }
                let s = 1.0 / lambda.sqrt();
                v.iter_mut().for_each(|x| *x *= s);
            }
            self.normalization = Normalization::Energy;
        }
        Ok(self)
    }

    /// Relative residuals `||A u - lambda M u|| / ||A u||`.
    pub fn residuals(&self, a: &CsrMatrix, m: &CsrMatrix) -> Vec<f64> {
        self.vectors
            .iter()
            .zip(&self.eigenvalues)
            .map(|(u, &lambda)| relative_residual(a, m, u, lambda))
            .collect()
    }
}

pub(crate) fn relative_residual(a: &CsrMatrix, m: &CsrMatrix, u: &[f64], lambda: f64) -> f64 {
    let au = a.mul_vec(u);
    let mu = m.mul_vec(u);
    let r: Vec<f64> = au.iter().zip(&mu).map(|(x, y)| x - lambda * y).collect();
    norm2(&r) / norm2(&au)
}

/// Flips `v` so that its largest-magnitude entry is positive.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// All eigenpairs of the symmetric pencil `A x = lambda M x` with `M` SPD.
///
/// `M = L L^T` is factored, the standard problem `L^{-1} A L^{-T} y =
/// lambda y` is solved by tridiagonal QL, and `x = L^{-T} y`. The returned
/// vectors are `M`-orthonormal.
pub fn dense_gevp(a: &DenseMatrix, m: &DenseMatrix) -> Result<EigenpairSet> {
    let n = a.nrows;
    if !a.is_square() || !m.is_square() || m.nrows != n {
        return Err(Error::DimensionMismatch { expected: n, found: m.nrows });
    }
    let chol = Cholesky::factor(m)?;
    // C = L^{-1} (L^{-1} A)^T, which equals L^{-1} A L^{-T} for symmetric A.
    let mut y = a.clone();
    chol.forward_rows(&mut y);
    let mut c = y.transpose();
    chol.forward_rows(&mut c);
    c.symmetrize();
    let eig = symmetric_eigen(&c)?;
    let mut vectors = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = eig.vectors.row(i).to_vec();
        chol.backward(&mut x);
        fix_sign(&mut x);
        vectors.push(x);
    }
    Ok(EigenpairSet { eigenvalues: eig.values, vectors, normalization: Normalization::Mass })
}

/// Result of Gram-Schmidt in the inner product `<x, G y>`.
#[derive(Debug, Clone)]
pub struct Orthonormal {
    pub columns: Vec<Vec<f64>>,
    /// `G q` for every kept column.
    pub images: Vec<Vec<f64>>,
    /// Input positions of the kept columns.
    pub kept: Vec<usize>,
}

/// Two-pass modified Gram-Schmidt in the inner product induced by the SPD
/// operator `apply`. A column is dropped when its norm after projection is
/// below `drop_tol` times its original norm.
pub fn orthonormalize_with(
    columns: &[Vec<f64>],
    apply: impl Fn(&[f64]) -> Vec<f64>,
    drop_tol: f64,
) -> Result<Orthonormal> {
    let mut out = Orthonormal { columns: Vec::new(), images: Vec::new(), kept: Vec::new() };
    for (idx, v) in columns.iter().enumerate() {
        let original = dot(v, &apply(v)).max(0.0).sqrt();
        if !(original > 0.0) || !original.is_finite() {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for (q, gq) in out.columns.iter().zip(&out.images) {
                let c = dot(gq, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let mut gw = apply(&w);
        let norm = dot(&w, &gw).max(0.0).sqrt();
        if norm <= drop_tol * original {
            continue;
        }
        w.iter_mut().for_each(|x| *x /= norm);
        gw.iter_mut().for_each(|x| *x /= norm);
        out.columns.push(w);
        out.images.push(gw);
        out.kept.push(idx);
    }
    if out.columns.is_empty() {
        return Err(Error::EmptyBasis);
    }
    Ok(out)
}

/// Orthonormalizes `columns` in the energy inner product `x^T A y`, dropping
/// numerically dependent columns.
pub fn ah_orthonormalize(columns: &[Vec<f64>], a: &CsrMatrix, drop_tol: f64) -> Result<Vec<Vec<f64>>> {
    Ok(orthonormalize_with(columns, |v| a.mul_vec(v), drop_tol)?.columns)
}

/// Gram matrix `Q^T G Q` of a family of columns.
pub fn gram(columns: &[Vec<f64>], g: &CsrMatrix) -> DenseMatrix {
    let images: Vec<Vec<f64>> = columns.iter().map(|c| g.mul_vec(c)).collect();
    let n = columns.len();
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = dot(&columns[i], &images[j]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_cr;
    use crate::mesh::uniform_mesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        let mut b = DenseMatrix::zeros(n, n);
        b.data.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        let mut a = b.transpose().matmul(&b);
        for i in 0..n {
            a[(i, i)] += 0.5;
        }
        a
    }

    /// Number of eigenvalues of the pencil below `sigma`, from the inertia of
    /// `A - sigma M` (negative pivots of an unpivoted LDL^T).
    fn count_below(a: &DenseMatrix, m: &DenseMatrix, sigma: f64) -> usize {
        let n = a.nrows;
        let mut s = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] = a[(i, j)] - sigma * m[(i, j)];
            }
        }
        let mut negatives = 0;
        for k in 0..n {
            let d = s[(k, k)];
            if d < 0.0 {
                negatives += 1;
            }
            for i in k + 1..n {
                let f = s[(i, k)] / d;
                for j in k + 1..n {
                    s[(i, j)] -= f * s[(k, j)];
                }
            }
        }
        negatives
    }

    fn bisect(a: &DenseMatrix, m: &DenseMatrix, index: usize, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if count_below(a, m, mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn diagonal_pencil() {
        let a = DenseMatrix::from_diagonal(&[8.0, 2.0]);
        let eig = dense_gevp(&a, &DenseMatrix::identity(2)).unwrap();
        assert_eq!(eig.eigenvalues, vec![2.0, 8.0]);
        assert_eq!(eig.vectors, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn identity_pencil() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_spd(9, &mut rng);
        let eig = dense_gevp(&a, &a).unwrap();
        assert!(eig.eigenvalues.iter().all(|l| (l - 1.0).abs() < 1e-12));
    }

    #[test]
    fn random_pencil_matches_bisection() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_spd(20, &mut rng);
        let m = random_spd(20, &mut rng);
        let eig = dense_gevp(&a, &m).unwrap();
        let hi = eig.eigenvalues[19] * 2.0 + 1.0;
        for (i, &l) in eig.eigenvalues.iter().enumerate() {
            let oracle = bisect(&a, &m, i, 0.0, hi);
            assert!((l - oracle).abs() <= 1e-10 * oracle.max(1.0), "{i}: {l} vs {oracle}");
        }
        for (i, x) in eig.vectors.iter().enumerate() {
            for (j, y) in eig.vectors.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((m.inner(x, y) - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn congruence_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 12;
        let a = random_spd(n, &mut rng);
        let m = random_spd(n, &mut rng);
        // Random orthogonal matrix from the eigenvectors of a random SPD matrix.
        let q = symmetric_eigen(&random_spd(n, &mut rng)).unwrap().vectors;
        let (a2, m2) = (q.matmul(&a).matmul(&q.transpose()), q.matmul(&m).matmul(&q.transpose()));
        let (e1, e2) = (dense_gevp(&a, &m).unwrap(), dense_gevp(&a2, &m2).unwrap());
        for (x, y) in e1.eigenvalues.iter().zip(&e2.eigenvalues) {
            assert!((x - y).abs() < 1e-10 * x.abs().max(1.0));
        }
        // x2 = Q x1 up to sign.
        for (x1, x2) in e1.vectors.iter().zip(&e2.vectors) {
            let qx = q.mul_vec(x1);
            let c = m2.inner(&qx, x2).abs();
            assert!((c - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn non_spd_mass_rejected() {
        let a = DenseMatrix::identity(2);
        let m = DenseMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(dense_gevp(&a, &m), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn orthonormalization() {
        let a = assemble_cr(&uniform_mesh(16).unwrap()).unwrap().stiffness;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cols: Vec<Vec<f64>> = (0..5).map(|_| (0..a.nrows).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let q = ah_orthonormalize(&cols, &a, 1e-10).unwrap();
        assert_eq!(q.len(), 5);
        let g = gram(&q, &a);
        for i in 0..5 {
            for j in 0..5 {
                assert!((g[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        // Orthonormal input is returned unchanged up to roundoff.
        let again = ah_orthonormalize(&q, &a, 1e-10).unwrap();
        for (x, y) in q.iter().zip(&again) {
            assert!(x.iter().zip(y).all(|(p, r)| (p - r).abs() < 1e-12));
        }
        // A duplicate is dropped; an all-zero family is an error.
        let dup = vec![cols[0].clone(), cols[1].clone(), cols[0].clone()];
        let o = orthonormalize_with(&dup, |v| a.mul_vec(v), 1e-10).unwrap();
        assert_eq!(o.kept, vec![0, 1]);
        assert!(matches!(ah_orthonormalize(&[vec![0.0; a.nrows]], &a, 1e-10), Err(Error::EmptyBasis)));
    }
}
