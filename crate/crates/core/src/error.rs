//! Crate-wide error type.

/// Errors surfaced by the numerical kernels.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two fields (or a field and an operator) live on different grids.
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    /// An operation requires a dimension the geometry does not satisfy.
    #[error("operation `{op}` requires d = 4, geometry has d = {dim}")]
    DimensionUnsupported { op: &'static str, dim: usize },

    /// An operation is only defined on one grid kind.
    #[error("operation `{op}` is not available on this geometry kind")]
    WrongGeometryKind { op: &'static str },

    /// An operation applies to this grid kind, but not with these arguments
    /// (e.g. an off-center translation on a radial grid).
    #[error("unsupported on this backend: {0}")]
    UnsupportedOnBackend(String),

    /// The grid cannot hold the requested object: mass or Dirichlet energy
    /// would be lost past the edge or under the resolution floor.
    #[error("resolution loss: {0}")]
    ResolutionLoss(String),

    /// A precondition bounding the analysis regime was violated.
    #[error("out of regime: {0}")]
    OutOfRegime(String),

    /// A ratio or normalization is undefined for the zero field.
    #[error("undefined for the zero field: {0}")]
    ZeroField(&'static str),

    /// A quantity that must be positive (by theory) came out nonpositive —
    /// the grid is too coarse or a constraint projection is broken.
    #[error("discretization failure: {0}")]
    DiscretizationFailure(String),

    /// The eigensolver did not isolate the requested eigenvalue.
    #[error("eigensolve failed: {0}")]
    EigensolveFailure(String),

    /// A linear system was singular or a factorization broke down.
    #[error("singular linear system: {0}")]
    SingularSystem(String),

    /// A constraint family was linearly degenerate.
    #[error("degenerate constraint basis: {0}")]
    DegenerateBasis(String),

    /// Newton fit did not converge.
    #[error("fit did not converge: {0}")]
    FitDiverged(String),

    /// The orbit profile recursion broke down at a given order.
    #[error("profile recursion failed at order {order}: {detail}")]
    RecursionFailure { order: usize, detail: String },

    /// Adaptive time stepping drove the step size below its floor.
    #[error("stiffness failure: {0}")]
    StiffnessFailure(String),

    /// Malformed configuration or CLI input.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed snapshot or report file.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
