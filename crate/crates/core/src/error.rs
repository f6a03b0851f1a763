use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed specification: {0}")]
    InvalidSpec(String),
    #[error("horizon mismatch: need {needed} entries, got {got}")]
    HorizonMismatch { needed: usize, got: usize },
    #[error("atom limit exceeded: {atoms} atoms on the enumerated side, limit {limit}")]
    AtomLimit { atoms: usize, limit: usize },
    #[error("table does not cover {0}")]
    Coverage(String),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("declared independence violated by {0:e}")]
    NotIndependent(f64),
    #[error("remark equality violated: lhs={lhs}, rhs={rhs}")]
    RemarkViolated { lhs: f64, rhs: f64 },
    #[error("unavailable: {0}")]
    Unavailable(String),
    #[error("degenerate variance")]
    DegenerateVariance,
    #[error("variance curve not monotone at k={k}: {value} < {reference}")]
    NonMonotoneVariance { k: usize, value: f64, reference: f64 },
    #[error("divergent integral: {0}")]
    Divergent(String),
    #[error("assumption failed: {}", .0.join(", "))]
    AssumptionFailed(Vec<String>),
    #[error("coupling invariant broken: {0}")]
    CouplingBroken(String),
    #[error("incompatible binning")]
    Binning,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unrecognized result layout in {0}")]
    UnrecognizedLayout(String),
    #[error("acceptance check failed: {0}")]
    CheckFailed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidSpec(msg.into()))
}
