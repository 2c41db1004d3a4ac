use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("integral does not converge: {0}")]
    NonIntegrable(String),

    #[error("{what} = {value} is outside the domain ({lower}, {upper})")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("misuse: {0}")]
    Misuse(String),

    #[error("CFL condition violated: dt * sum(theta/dx) = {number:.4} > {limit}")]
    Cfl { number: f64, limit: f64 },

    #[error("non-finite value {value} at grid index {index} (t = {time})")]
    NonFinite { index: usize, value: f64, time: f64 },

    #[error("field normalization: {0}")]
    Normalization(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },

    #[error("hamiltonian is not convex: {0}")]
    NotConvex(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
