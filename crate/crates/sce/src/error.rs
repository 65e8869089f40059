use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("label pole: {0}")]
    Pole(String),
    #[error("state within 1e-10 of the singular chart 1 + uB vB = 0")]
    SingularChart,
    #[error("integration step failed at t = {t}")]
    StepFailure { t: f64 },
    #[error("zero coordinate in analytic tangent matrix")]
    ZeroCoordinate,
    #[error("shooting did not converge, last residual {residual:e}")]
    Divergence { residual: f64 },
    #[error("singular Newton block")]
    SingularJacobian,
    #[error("caustic: block determinant {det:e}")]
    Caustic { det: f64 },
    #[error("quadrature grid needs at least 3 points, got {0}")]
    GridTooCoarse(usize),
    #[error("no seed converged")]
    EmptySum,
    #[error("finite-difference solve failed: {0}")]
    FiniteDifference(String),
    #[error("truncation insufficient: tail {tail:e}")]
    Truncation { tail: f64 },
    #[error("Newton did not converge from {0}")]
    NonConvergence(String),
    #[error("symmetry partner {point} has residual {residual:e}")]
    SymmetryViolation { point: String, residual: f64 },
    #[error("boundary condition violated, residual {0:e}")]
    BoundaryViolation(f64),
    #[error("config: {0}")]
    Config(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
