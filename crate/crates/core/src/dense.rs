//! Small dense matrices: Cholesky factorization and the symmetric
//! eigenproblem (Householder tridiagonalization followed by the implicit
//! shift QL iteration).

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::sparse::dot;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<f64>,
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.ncols + c]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.ncols + c]
    }
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        DenseMatrix { nrows, ncols, data: vec![0.0; nrows * ncols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(nrows, ncols);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), ncols, "ragged rows");
            m.row_mut(r).copy_from_slice(row);
        }
        m
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.ncols..(r + 1) * self.ncols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.ncols..(r + 1) * self.ncols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.nrows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = Self::zeros(self.ncols, self.nrows);
        for r in 0..self.nrows {
            for c in 0..self.ncols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.ncols, other.nrows);
        let mut out = Self::zeros(self.nrows, other.ncols);
        for r in 0..self.nrows {
            let out_row = &mut out.data[r * other.ncols..(r + 1) * other.ncols];
            for k in 0..self.ncols {
                let a = self[(r, k)];
                if a != 0.0 {
                    for (o, b) in out_row.iter_mut().zip(other.row(k)) {
                        *o += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// `x^T A y`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(self.mul_vec(y)).map(|(a, b)| a * b).sum()
    }

    /// Replaces the matrix by `(A + A^T) / 2`.
    pub fn symmetrize(&mut self) {
        assert_eq!(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for c in 0..r {
                let v = 0.5 * (self[(r, c)] + self[(c, r)]);
                self[(r, c)] = v;
                self[(c, r)] = v;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    pub fn factor(a: &DenseMatrix) -> Result<Cholesky> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch { expected: a.nrows, found: a.ncols });
        }
        let n = a.nrows;
        let mut l = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let (li, lj) = (l.row(i), l.row(j));
                let s = dot(&li[..j], &lj[..j]);
                let v = a[(i, j)] - s;
                if i == j {
                    if !(v > 0.0) || !v.is_finite() {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: v });
                    }
                    l[(i, i)] = v.sqrt();
                } else {
                    l[(i, j)] = v / l[(j, j)];
                }
            }
        }
        Ok(Cholesky { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows
    }

    pub fn factor_l(&self) -> &DenseMatrix {
        &self.l
    }

    /// Solves `L y = b` in place.
    pub fn forward(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let row = self.l.row(i);
            let s = dot(&row[..i], &b[..i]);
            b[i] = (b[i] - s) / row[i];
        }
    }

    /// Solves `L X = B` in place for a matrix right-hand side.
    pub fn forward_rows(&self, b: &mut DenseMatrix) {
        let n = self.dim();
        assert_eq!(b.nrows, n);
        let w = b.ncols;
        for i in 0..n {
            let (done, rest) = b.data.split_at_mut(i * w);
            let bi = &mut rest[..w];
            let li = self.l.row(i);
            for (k, prev) in done.chunks_exact(w).enumerate() {
                let f = li[k];
                if f != 0.0 {
                    for (x, p) in bi.iter_mut().zip(prev) {
                        *x -= f * p;
                    }
                }
            }
            let inv = 1.0 / li[i];
            bi.iter_mut().for_each(|x| *x *= inv);
        }
    }

    /// Solves `L^T x = y` in place.
    pub fn backward(&self, y: &mut [f64]) {
        let n = self.dim();
        for i in (0..n).rev() {
            y[i] /= self.l[(i, i)];
            let xi = y[i];
            let row = self.l.row(i);
            for k in 0..i {
                y[k] -= row[k] * xi;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward(&mut x);
        self.backward(&mut x);
        x
    }
}

/// Eigen-decomposition of a symmetric matrix: ascending eigenvalues and
/// orthonormal eigenvectors, one per row of `vectors`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Row `i` is the eigenvector of `values[i]`.
    pub vectors: DenseMatrix,
}

/// Full spectrum of a symmetric matrix.
pub fn symmetric_eigen(a: &DenseMatrix) -> Result<SymmetricEigen> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.nrows, found: a.ncols });
    }
    let n = a.nrows;
    if n == 0 {
        return Ok(SymmetricEigen { values: vec![], vectors: DenseMatrix::zeros(0, 0) });
    }
    let mut vt = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut vt, &mut d, &mut e);
    tridiagonal_ql(&mut vt, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.row_mut(dst).copy_from_slice(vt.row(src));
    }
    Ok(SymmetricEigen { values, vectors })
}

/// Householder reduction to tridiagonal form. The matrix is read from and
/// the orthogonal transform accumulated into `vt` in transposed storage, so
/// that the inner loops run along rows; on exit row `j` of `vt` is column `j`
/// of the transform, `d` is the diagonal and `e[1..]` the subdiagonal.
fn tridiagonalize(vt: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = vt[(j, n - 1)];
    }
    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = vt[(j, i - 1)];
                vt[(j, i)] = 0.0;
                vt[(i, j)] = 0.0;
            }
        } else {
            for dk in &mut d[..i] {
                *dk /= scale;
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].iter_mut().for_each(|x| *x = 0.0);

            for j in 0..i {
                let f = d[j];
                vt[(i, j)] = f;
                let mut g = e[j] + vt[(j, j)] * f;
                let row = &vt.row(j)[j + 1..i];
                for ((&vkj, dk), ek) in row.iter().zip(&d[j + 1..i]).zip(&mut e[j + 1..i]) {
                    g += vkj * dk;
                    *ek += vkj * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let (f, g) = (d[j], e[j]);
                for ((v, ek), dk) in vt.row_mut(j)[j..i].iter_mut().zip(&e[j..i]).zip(&d[j..i]) {
                    *v -= f * ek + g * dk;
                }
                d[j] = vt[(j, i - 1)];
                vt[(j, i)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        vt[(i, n - 1)] = vt[(i, i)];
        vt[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = vt[(i + 1, k)] / h;
            }
            let (head, tail) = vt.data.split_at_mut((i + 1) * n);
            let u = &tail[..=i];
            for row in head.chunks_exact_mut(n) {
                let row = &mut row[..=i];
                let g = dot(u, row);
                for (v, dk) in row.iter_mut().zip(&d[..=i]) {
                    *v -= g * dk;
                }
            }
        }
        for k in 0..=i {
            vt[(i + 1, k)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = vt[(j, n - 1)];
        vt[(j, n - 1)] = 0.0;
    }
    vt[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit-shift QL on the symmetric tridiagonal matrix `(d, e)`. `vt`
/// holds the accumulated transform transposed: row `i` becomes the
/// eigenvector belonging to `d[i]`.
fn tridiagonal_ql(vt: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let max_sweeps = 60 * n.max(1);
    let mut sweeps = 0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            loop {
                sweeps += 1;
                if sweeps > max_sweeps {
                    return Err(Error::NotConverged { iterations: sweeps, residual: e[l].abs() });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in &mut d[l + 2..n] {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    let ncols = vt.ncols;
                    let (lo, hi) = vt.data.split_at_mut((i + 1) * ncols);
                    let row_i = &mut lo[i * ncols..];
                    let row_next = &mut hi[..ncols];
                    for (a, b) in row_i.iter_mut().zip(row_next.iter_mut()) {
                        let hk = *b;
                        *b = s * *a + c * hk;
                        *a = c * *a - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}
