use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("point {point:?} lies outside the window [-{halfwidth}, {halfwidth}]^{dim}")]
    PointOutsideWindow {
        point: Vec<f64>,
        halfwidth: f64,
        dim: usize,
    },
    #[error("density support is not contained in the window: {0}")]
    SupportOutsideWindow(String),
    #[error("density has zero mass over the window")]
    ZeroMass,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("weights sum to {sum}, deviating from 1 by more than {tol}")]
    Normalization { sum: f64, tol: f64 },
    #[error("negative weight {weight} at line {line}")]
    NegativeWeight { line: usize, weight: f64 },
    #[error("numerical breakdown in simplex: {0}")]
    NumericalBreakdown(String),
    #[error("measure has {support} support cells but {marginals} marginals were requested")]
    InsufficientSupport { support: usize, marginals: usize },
    #[error("no transport plan of finite cost exists for this measure and cost")]
    NoFiniteCostPlan,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("plan has no support atom off the diagonal strip inside the window")]
    NoOffDiagonalSupport,
    #[error("swap neighborhoods {first} and {second} overlap in slot {slot}")]
    OverlappingNeighborhoods {
        first: usize,
        second: usize,
        slot: usize,
    },
    #[error("swap neighborhood {0} carries no plan mass")]
    EmptyRestriction(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
