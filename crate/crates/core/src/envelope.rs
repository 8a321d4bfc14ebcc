//! Envelope (variable band) Cholesky factorization of sparse SPD matrices.
//!
//! Row `i` of the factor is stored densely from the first nonzero column of
//! row `i` of the input up to the diagonal. Fill stays inside this envelope,
//! so the mesh orderings used here (bandwidth about `3n` for CR on an `n x n`
//! grid) factor in `O(N b^2)` time and `O(N b)` memory.

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    n: usize,
    first: Vec<usize>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Number of stored factor entries the envelope of `a` would need.
    pub fn envelope_size(a: &CsrMatrix) -> usize {
        (0..a.nrows).map(|i| i + 1 - first_column(a, i)).sum()
    }

    pub fn factor(a: &CsrMatrix) -> Result<EnvelopeCholesky> {
        if a.nrows != a.ncols {
            return Err(Error::DimensionMismatch { expected: a.nrows, found: a.ncols });
        }
        let n = a.nrows;
        let first: Vec<usize> = (0..n).map(|i| first_column(a, i)).collect();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for i in 0..n {
            offsets.push(offsets[i] + i + 1 - first[i]);
        }
        let mut values = vec![0.0; offsets[n]];
        for i in 0..n {
            for (c, v) in a.row(i) {
                if c <= i {
                    values[offsets[i] + c - first[i]] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let (done, rest) = values.split_at_mut(offsets[i]);
            let row_i = &mut rest[..i + 1 - fi];
            for j in fi..i {
                let fj = first[j];
                let row_j = &done[offsets[j]..offsets[j + 1]];
                let start = fi.max(fj);
                let s: f64 = row_i[start - fi..j - fi].iter().zip(&row_j[start - fj..j - fj]).map(|(x, y)| x * y).sum();
                let ljj = row_j[j - fj];
                row_i[j - fi] = (row_i[j - fi] - s) / ljj;
            }
            let s: f64 = row_i[..i - fi].iter().map(|x| x * x).sum();
            let pivot = row_i[i - fi] - s;
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(Error::NotPositiveDefinite { row: i, pivot });
            }
            row_i[i - fi] = pivot.sqrt();
        }
        Ok(EnvelopeCholesky { n, first, offsets, values })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn stored_entries(&self) -> usize {
        self.values.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.values[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let fi = self.first[i];
            let row = self.row(i);
            let s: f64 = row[..i - fi].iter().zip(&x[fi..i]).map(|(l, y)| l * y).sum();
            x[i] = (x[i] - s) / row[i - fi];
        }
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let row = self.row(i);
            x[i] /= row[i - fi];
            let xi = x[i];
            for (xk, l) in x[fi..i].iter_mut().zip(&row[..i - fi]) {
                *xk -= l * xi;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

fn first_column(a: &CsrMatrix, i: usize) -> usize {
    a.row(i).map(|(c, _)| c).next().unwrap_or(i).min(i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_cr;
    use crate::dense::Cholesky;
    use crate::mesh::uniform_mesh;

    #[test]
    fn matches_dense_factorization() {
        let a = assemble_cr(&uniform_mesh(5).unwrap()).unwrap().stiffness;
        let env = EnvelopeCholesky::factor(&a).unwrap();
        let dense = Cholesky::factor(&a.to_dense()).unwrap();
        let b: Vec<f64> = (0..a.nrows).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let (x1, x2) = (env.solve(&b), dense.solve(&b));
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-12 * q.abs().max(1.0));
        }
        assert!(env.stored_entries() < a.nrows * a.nrows);
        assert_eq!(env.stored_entries(), EnvelopeCholesky::envelope_size(&a));
    }

    #[test]
    fn rejects_indefinite() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 3.0), (1, 0, 3.0), (1, 1, 1.0)]);
        assert!(matches!(EnvelopeCholesky::factor(&a), Err(Error::NotPositiveDefinite { row: 1, .. })));
    }
}
