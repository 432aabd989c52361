use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A risk or solver parameter (θ, α, resolution, ...) is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An input lies outside the domain of the functional being evaluated.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("variance needs at least 2 samples, got {0}")]
    VarianceUnavailable(usize),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error(
        "numerical instability at theta = {theta}: non-finite value at t = {t}, node {node}, control index {control}"
    )]
    NumericalInstability {
        theta: f64,
        t: usize,
        node: usize,
        control: usize,
    },

    #[error("estimated memory {required} bytes exceeds budget of {budget} bytes")]
    MemoryBudget { required: u64, budget: u64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
