use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("the gauge is not differentiable at the origin")]
    ZeroVector,
    #[error("invalid body: {0}")]
    InvalidBody(String),
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("origin is not an interior point of the transformed body (H_base = {0})")]
    OriginNotInterior(f64),
    #[error(
        "fenchel newton did not converge (residual {residual:e} after {iterations} iterations)"
    )]
    NewtonDivergence { residual: f64, iterations: usize },

    #[error("eta = {eta} lies within {distance:e} of the spectrum")]
    EtaInSpectrum { eta: f64, distance: f64 },
    #[error("profile conditions infeasible: {0}")]
    InfeasibleConditions(String),
    #[error("no bracket for the smoothed fenchel scalar equation")]
    BracketFailure,

    #[error("grid of {grid} points is too coarse for l_max = {l_max} (need at least {})", 4 * l_max)]
    GridTooCoarse { grid: usize, l_max: usize },

    #[error("loop action {0} is not positive")]
    NonpositiveAction(f64),
    #[error("reduction threshold violated: 2pi(l+1) = {lhs} <= hbar = {hbar}")]
    ThresholdViolated { lhs: f64, hbar: f64 },
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("reduced hessian asymmetry {0:e} exceeds 1e-4")]
    AsymmetryTooLarge(f64),

    #[error("seed loop has nonpositive action {0}")]
    SeedNonpositiveAction(f64),
    #[error("iterate collapsed to the trivial critical point")]
    CollapsedToZero,
    #[error("critical value {value} outside the band ({lo}, {hi})")]
    ValueOutOfBand { value: f64, lo: f64, hi: f64 },

    #[error("degenerate circle: nullity {0}")]
    DegenerateCircle(usize),

    #[error("missing index data for circle {0}")]
    MissingIndexData(String),
    #[error("odd transverse index {index} on circle {id}")]
    OddIndexPresent { id: String, index: usize },
    #[error("need capacities through c_{needed}, have {have}")]
    InsufficientCapacities { needed: usize, have: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NewtonDivergence { .. } | Error::NoConvergence(_) => 3,
            _ => 2,
        }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::ZeroVector => "ZeroVector",
            Error::InvalidBody(_) => "InvalidBody",
            Error::SingularMatrix => "SingularMatrix",
            Error::OriginNotInterior(_) => "OriginNotInterior",
            Error::NewtonDivergence { .. } => "NewtonDivergence",
            Error::EtaInSpectrum { .. } => "EtaInSpectrum",
            Error::InfeasibleConditions(_) => "InfeasibleConditions",
            Error::BracketFailure => "BracketFailure",
            Error::GridTooCoarse { .. } => "GridTooCoarse",
            Error::NonpositiveAction(_) => "NonpositiveAction",
            Error::ThresholdViolated { .. } => "ThresholdViolated",
            Error::NoConvergence(_) => "NoConvergence",
            Error::AsymmetryTooLarge(_) => "AsymmetryTooLarge",
            Error::SeedNonpositiveAction(_) => "SeedNonpositiveAction",
            Error::CollapsedToZero => "CollapsedToZero",
            Error::ValueOutOfBand { .. } => "ValueOutOfBand",
            Error::DegenerateCircle(_) => "DegenerateCircle",
            Error::MissingIndexData(_) => "MissingIndexData",
            Error::OddIndexPresent { .. } => "OddIndexPresent",
            Error::InsufficientCapacities { .. } => "InsufficientCapacities",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Parse { .. } => "Parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
