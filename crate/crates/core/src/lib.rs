//! Crouzeix–Raviart eigenvalue lab for the Laplacian on the unit square.
//!
//! Nested uniform meshes, CR and P1 assembly, a sparse and dense linear
//! algebra kernel, the P1-to-CR embedding, augmented subspace eigensolvers
//! and the error analysis around them.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod assembly;
pub mod augmented;
pub mod cli;
pub mod dense;
pub mod eigen;
pub mod envelope;
pub mod error;
pub mod mesh;
pub mod pcg;
pub mod quadrature;
pub mod reference;
pub mod sparse;
pub mod transfer;

pub use assembly::{assemble_cr, assemble_p1, DofMap, FeSystem};
pub use augmented::{run_algorithm_k, run_algorithm_one, AugmentedOptions, AugmentedProblem, IterationReport};
pub use eigen::{dense_gevp, EigenpairSet};
pub use error::{Error, Result};
pub use mesh::{refine_uniform, uniform_mesh, TriMesh};
pub use reference::reference_eigensolve;
pub use sparse::CsrMatrix;
pub use transfer::p1_to_cr_embedding;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/mesh.md")]
    mod mesh {}
    #[doc = include_str!("../../../book/src/assembly.md")]
    mod assembly {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/transfer.md")]
    mod transfer {}
    #[doc = include_str!("../../../book/src/augmented.md")]
    mod augmented {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
