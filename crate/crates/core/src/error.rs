use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("cell sets live on different grids")]
    GridMismatch,

    #[error("control outside dynamics limits: {0}")]
    ControlOutOfLimits(String),

    #[error("infeasible scenario spec: {0}")]
    InfeasibleScenario(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("task infeasible for this design: {0}")]
    TaskInfeasible(String),

    #[error("poset mismatch: {0}")]
    PosetMismatch(String),

    #[error(
        "fixed-point iteration did not converge within {iterations} iterations on loop `{name}`"
    )]
    Divergence { name: String, iterations: usize },

    #[error("unresolved catalog references: {0:?}")]
    UnresolvedReferences(Vec<String>),

    #[error("requirement atoms covered by no candidate: {0:?}")]
    Uncoverable(Vec<String>),

    #[error("no selection satisfies the cover and mount constraints: {0}")]
    CoverInfeasible(String),

    #[error("unsupported schema version {found} (expected {expected})")]
    Schema { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
