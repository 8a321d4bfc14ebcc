use std::path::PathBuf;

/// Errors produced by mesh construction, assembly, the solvers and the
/// experiment driver.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("triangle {index} is degenerate (area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("point ({x}, {y}) lies outside the unit square")]
    PointOutside { x: f64, y: f64 },

    #[error("non-finite value {value} at ({x}, {y})")]
    NonFinite { x: f64, y: f64, value: f64 },

    #[error("no quadrature rule of degree {0} on triangles")]
    UnsupportedQuadrature(usize),

    #[error("iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("matrix is not positive definite (curvature {curvature:e} at iteration {iteration})")]
    Indefinite { iteration: usize, curvature: f64 },

    #[error("factorization failed: pivot {pivot:e} at row {row} is not positive")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("every column was dropped during orthonormalization")]
    EmptyBasis,

    #[error("augmented basis is degenerate at iteration {iteration}: no iterate survived conditioning")]
    DegenerateBasis { iteration: usize },

    #[error("Gram matrix of the approximation space is singular")]
    SingularGram,

    #[error("meshes are not nested: {0}")]
    NonNested(String),

    #[error("reference holds {available} eigenpairs but {required} are required")]
    InsufficientBuffer { available: usize, required: usize },

    #[error("rate fit needs at least {required} errors above the floor, found {available}")]
    TooFewSamples { available: usize, required: usize },

    #[error("zero vector supplied where a nonzero one is required")]
    ZeroVector,

    #[error("linear solve {index} failed at iteration {iteration}: {source}")]
    SolveFailed {
        index: usize,
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
