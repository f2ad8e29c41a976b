//! Error types for geometry construction, assembly and solves.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("boundary sampling needs at least 16 points, got {0}")]
    TooFewSamples(usize),
    #[error("mesh size h = {h} out of range, expected 0 < h < {max} for this boundary")]
    InvalidMeshSize { h: f64, max: f64 },
    #[error("mesh quality failure: triangle {triangle} near ({x:.4}, {y:.4}) has min angle {min_angle_deg:.2} deg (< {threshold_deg} deg)")]
    QualityFailure {
        triangle: usize,
        x: f64,
        y: f64,
        min_angle_deg: f64,
        threshold_deg: f64,
    },
    #[error("mesh invariant violated: {0}")]
    InvariantViolation(String),
    #[error("mesh cache parse failure at line {line}: {message}")]
    CacheParse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("singular isoparametric Jacobian in element {element} (det J = {det:.3e} at quadrature point {point})")]
    SingularJacobian {
        element: usize,
        det: f64,
        point: usize,
    },
    #[error("assembly invariant violated: {0}")]
    InvariantViolation(String),
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("dimension mismatch: expected {expected} entries for {what}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error("solve produced non-finite entries ({0})")]
    NonFinite(&'static str),
    #[error("post-solve residual check failed: relative residual {residual:.3e} exceeds {limit:.1e}")]
    ResidualCheck { residual: f64, limit: f64 },
    #[error(
        "saddle system near-singular at lambda = {re}{im:+}i: \
         condition estimate {condest:.3e}, relative residual {residual:.3e}"
    )]
    NearSingular {
        re: f64,
        im: f64,
        condest: f64,
        residual: f64,
    },
    #[error("zero data: {0}")]
    ZeroData(&'static str),
}

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("problem too large for dense path: {size} unknowns exceeds cap {cap}")]
    TooLargeForDense { size: usize, cap: usize },
    #[error("eigeniteration failed to converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("sweep point outside requested sector: lambda = {re}{im:+}i")]
    OutsideSector { re: f64, im: f64 },
}

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("invalid time grid: {0}")]
    BadTimeGrid(String),
    #[error("max-regularity ratio undefined: forcing norm {0:.3e} is numerically zero")]
    ZeroForcing(f64),
    #[error("oracle restricted to at most {cap} unknowns, got {size}")]
    OracleTooLarge { size: usize, cap: usize },
}
