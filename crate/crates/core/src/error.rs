use thiserror::Error;

/// Errors raised by the geometric engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate scalar product: smallest singular value {smallest:e} below tolerance {tol:e}")]
    DegenerateMetric { smallest: f64, tol: f64 },

    #[error("declared signature ({declared_plus}, {declared_minus}) differs from computed inertia ({plus}, {minus})")]
    SignatureMismatch {
        declared_plus: usize,
        declared_minus: usize,
        plus: usize,
        minus: usize,
    },

    #[error("input vectors are linearly dependent (rank {rank} < {count})")]
    DependentVectors { rank: usize, count: usize },

    #[error("degenerate pivot at position {index}: |g(w,w)| = {norm:e}")]
    DegeneratePivot { index: usize, norm: f64 },

    #[error("degenerate plane: |Δ| = {delta:e} below tolerance {tol:e}")]
    DegeneratePlane { delta: f64, tol: f64 },

    #[error("vector is null or zero; the classical Jacobi operator needs a non-null base vector")]
    NullBase,

    #[error("vector is not null: g(u,u) = {norm:e}")]
    NotNull { norm: f64 },

    #[error("quotient metric is not positive definite (min eigenvalue {min_eigenvalue:e}); a Lorentzian scalar product is required")]
    QuotientNotDefinite { min_eigenvalue: f64 },

    #[error("non-real eigenvalues in the general-eigenvalue fallback (max |Im| = {max_imag:e})")]
    NonRealSpectrum { max_imag: f64, eigenvalues: Vec<(f64, f64)> },

    #[error("general eigensolver did not converge on a {dim}x{dim} matrix")]
    EigenSolver { dim: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("structure check failed: {0}")]
    Structure(String),

    #[error("sampler failure: {0}")]
    Sampler(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;
