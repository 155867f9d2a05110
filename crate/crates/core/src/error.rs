use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("undeclared variable '{name}' at byte {position}")]
    UndeclaredVariable { name: String, position: usize },
    #[error("exponent {exponent} at byte {position} exceeds the limit of 30")]
    ExponentOverflow { position: usize, exponent: u64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("frame is not orthonormal (deviation {deviation:.3e})")]
    NonOrthonormalFrame { deviation: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("invalid family specification: {0}")]
    Spec(String),
    #[error("singular point at {point:?} (gradient norm {gradient_norm:.3e})")]
    SingularPoint { point: Vec<f64>, gradient_norm: f64 },
    #[error("point is not on the set: residual {residual:.3e}")]
    OffSet { residual: f64 },
    #[error("vector is not a unit vector (norm {norm})")]
    NonUnit { norm: f64 },
    #[error("linear map is not surjective (Rabier number {nu:.3e})")]
    NotSurjective { nu: f64 },
    #[error("flow blocked: suspected generalized critical value on segment (t = {t:.6}, {reason})")]
    FlowBlocked { t: f64, reason: String },
    #[error("tangential intersection with the sphere of radius {radius} at {point:?}")]
    Tangential { radius: f64, point: Vec<f64> },
    #[error("mesh resolution too coarse: {0}")]
    ResolutionTooCoarse(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("did not stabilize: {0}")]
    NotStabilized(String),
    #[error("too many failed plane sections: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("I/O error at {path}: {message}")]
    Io { path: String, message: String },
    #[error("continuation did not terminate after {0} steps")]
    TraceOverflow(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
