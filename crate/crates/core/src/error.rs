use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("chart arity {got} does not match manifold dimension {expected}")]
    Arity { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("points or spaces live on different manifolds")]
    ManifoldMismatch,

    #[error("tangent vector must have unit norm, got {0}")]
    NotUnit(f64),

    #[error("{what} = {value} is outside its admissible range")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("ellipse semi-axes must be positive, got a={a}, b={b}")]
    InvalidAxes { a: f64, b: f64 },

    #[error("bandwidth must be positive, got {0}")]
    InvalidBand(f64),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("kernel needs a basis enumerated up to {needed}, have {have}")]
    BasisTooSmall { needed: f64, have: f64 },

    #[error("cell tree: {0}")]
    CellTree(String),

    #[error("adjacency graph at level {0} is disconnected")]
    Disconnected(u32),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("schema version {found} does not match expected {expected}")]
    Schema { expected: u32, found: u32 },

    #[error("length mismatch: {0}")]
    Length(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
