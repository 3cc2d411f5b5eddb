use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error(
        "gram matrix of {n} points is not positive definite even with jitter {max_jitter:e}; \
         inputs are probably duplicated or lengthscales too long for the spacing"
    )]
    IllConditioned { n: usize, max_jitter: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("hyperparameters outside prior support: {0}")]
    OutsidePriorSupport(String),

    #[error("every grid point has already been evaluated")]
    GridExhausted,

    #[error("requested {requested} grid points but the grid only has {available}")]
    GridTooSmall { requested: usize, available: usize },

    #[error("point {0:?} is not a node of the lookup grid")]
    OffGrid(Vec<f64>),

    #[error("grid table: {0}")]
    GridTable(String),

    #[error("evaluation budget of {budget} exhausted")]
    BudgetExhausted { budget: usize },

    #[error("nonlinear solve did not converge at step {step} after {iterations} iterations")]
    NonConvergence { step: usize, iterations: usize },

    #[error("waveform is empty")]
    EmptyWaveform,

    #[error("objective evaluation failed: {0}")]
    Objective(String),

    #[error("every hyperparameter sample failed to produce a posterior")]
    AllSamplesFailed,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
