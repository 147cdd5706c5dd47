use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A Gram-Schmidt pivot fell below `eps * scale`.
    DegenerateInput {
        index: usize,
        pivot: f64,
        threshold: f64,
    },
    RankMismatch {
        left: usize,
        right: usize,
    },
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    DegreeMismatch {
        form: usize,
        plane: usize,
    },
    EmptyBall,
    /// `sum psi_beta(y) = 0`: the query point is outside every support.
    NotCovered,
    EigengapTooSmall {
        gap: f64,
        threshold: f64,
    },
    NoConvergence {
        iterations: usize,
        residual: f64,
    },
    FiberDegenerate {
        min_eigenvalue: f64,
    },
    PartialCertificate,
    /// Bad balls remained after the last permitted recursion level.
    DepthExceeded {
        depth: usize,
    },
    ParamOutOfRange(&'static str),
    InvalidInput(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DegenerateInput { index, pivot, threshold } => write!(f, "degenerate input: pivot {index} has norm {pivot:e} < {threshold:e}"),
            Error::RankMismatch { left, right } => {
                write!(f, "projector ranks differ ({left} vs {right})")
            }
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::DegreeMismatch { form, plane } => {
                write!(f, "form of degree {form} evaluated on a {plane}-plane")
            }
            Error::DepthExceeded { depth } => write!(f, "covering did not terminate within depth {depth}"),
            Error::EmptyBall => f.write_str("no sample points inside the ball"),
            Error::NotCovered => f.write_str("point not covered by the partition of unity"),
            Error::EigengapTooSmall { gap, threshold } => {
                write!(f, "eigengap {gap:.3e} below threshold {threshold:.3e}")
            }
            Error::NoConvergence { iterations, residual } => write!(f, "no convergence after {iterations} iterations (residual {residual:e})"),
            Error::FiberDegenerate { min_eigenvalue } => write!(f, "restricted hessian degenerate (smallest eigenvalue {min_eigenvalue:.3e})"),
            Error::PartialCertificate => f.write_str("certificate is partial"),
            Error::ParamOutOfRange(what) => write!(f, "parameter out of range: {what}"),
            Error::InvalidInput(what) => write!(f, "invalid input: {what}"),
        }
    }
}

impl core::error::Error for Error {}
