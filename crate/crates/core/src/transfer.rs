//! Embedding of the coarse conforming P1 space into the fine CR space.
//!
//! A continuous piecewise linear function on the coarse mesh is also linear
//! on every fine triangle, so its CR coefficients are its values at the fine
//! edge midpoints.

use crate::assembly::{barycentric_coordinates, DofMap};
use crate::error::{Error, Result};
use crate::mesh::{edge_midpoints, TriMesh};
use crate::sparse::CsrMatrix;

const NESTING_TOL: f64 = 1e-12;

/// Prolongation `P` from coarse interior-vertex coefficients to fine
/// interior-edge coefficients.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    pub p: CsrMatrix,
    pub coarse_dofs: DofMap,
    pub fine_dofs: DofMap,
}

impl EmbeddingMatrix {
    pub fn fine_dim(&self) -> usize {
        self.p.nrows
    }

    pub fn coarse_dim(&self) -> usize {
        self.p.ncols
    }

    /// `P c`.
    pub fn prolong(&self, coarse: &[f64]) -> Vec<f64> {
        self.p.mul_vec(coarse)
    }

    /// `P^T f`.
    pub fn restrict(&self, fine: &[f64]) -> Vec<f64> {
        self.p.transpose_mul_vec(fine)
    }
}

/// Builds `P[e, v]` = coarse hat of vertex `v` at the midpoint of fine edge
/// `e`. The fine mesh must come from the coarse one by zero or more uniform
/// refinements.
pub fn p1_to_cr_embedding(coarse: &TriMesh, fine: &TriMesh) -> Result<EmbeddingMatrix> {
    if !fine.n.is_multiple_of(coarse.n) || !(fine.n / coarse.n).is_power_of_two() {
        return Err(Error::NonNested(format!(
            "fine subdivision {} is not a power-of-two multiple of coarse subdivision {}",
            fine.n, coarse.n
        )));
    }
    let coarse_dofs = DofMap::p1(coarse);
    let fine_dofs = DofMap::cr(fine);
    let midpoints = edge_midpoints(fine);
    let mut triplets = Vec::with_capacity(3 * fine_dofs.len());
    for row in 0..fine_dofs.len() {
        let e = fine_dofs.entity(row);
        let verts = coarse.locate(midpoints[e])?;
        let tri = verts.map(|v| coarse.vertices[v]);
        // The whole fine edge must lie in the coarse triangle holding its
        // midpoint, otherwise the coarse hats are not linear along it.
        for endpoint in fine.edges[e] {
            let l = barycentric_coordinates(&tri, fine.vertices[endpoint]);
            if l.iter().any(|&li| li < -NESTING_TOL) {
                return Err(Error::NonNested(format!("fine edge {e} crosses a coarse triangle boundary")));
            }
        }
        let lambda = barycentric_coordinates(&tri, midpoints[e]);
        for (v, l) in verts.into_iter().zip(lambda) {
            if let Some(col) = coarse_dofs.dof(v) {
                if l.abs() > NESTING_TOL {
                    triplets.push((row, col, l));
                }
            }
        }
    }
    let p = CsrMatrix::from_triplets(fine_dofs.len(), coarse_dofs.len(), triplets);
    Ok(EmbeddingMatrix { p, coarse_dofs, fine_dofs })
}
