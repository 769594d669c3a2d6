use thiserror::Error;

/// Errors raised by the geometric kernel.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("zero or non-finite homogeneous vector")]
    ZeroVector,

    #[error("empty meet: the linear intersection is trivial")]
    EmptyMeet,

    #[error("polar undefined: form times basis has rank {rank} < {expected}")]
    PolarUndefined { rank: usize, expected: usize },

    #[error("point is not on the quadric (residual {residual:e})")]
    NotOnQuadric { residual: f64 },

    #[error("point is not on the line (residual {residual:e})")]
    NotOnLine { residual: f64 },

    #[error("line is isotropic for the quadric")]
    IsotropicLine,

    #[error("quadric fit over-constrained: no nonzero solution")]
    OverConstrained,

    #[error("quadric fit under-determined: solution space has dimension {dim}")]
    UnderDetermined { dim: usize },

    #[error("pencil is everywhere degenerate")]
    PencilDegenerate,

    #[error("forms are proportional and do not span a pencil")]
    ProportionalForms,

    #[error("degenerate quad at cell ({i}, {j})")]
    DegenerateQuad { i: usize, j: usize },

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("non-generic configuration: {0}")]
    NonGeneric(String),

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("span deficient: points span dimension {dim}, expected {expected}")]
    SpanDeficient { dim: usize, expected: usize },

    #[error("at cell ({i}, {j}): {source}")]
    Cell {
        i: usize,
        j: usize,
        #[source]
        source: Box<GeomError>,
    },

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl GeomError {
    /// Attaches grid coordinates, keeping the innermost ones.
    pub fn at(self, i: usize, j: usize) -> GeomError {
        match self {
            e @ GeomError::Cell { .. } => e,
            e => GeomError::Cell { i, j, source: Box::new(e) },
        }
    }

    /// The error with any grid coordinates stripped.
    pub fn root(&self) -> &GeomError {
        match self {
            GeomError::Cell { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, GeomError>;
