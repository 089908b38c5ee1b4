use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("construction error: {0}")]
    Construction(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("no convergence after {iterations} iterations (last increment {last:.3e})")]
    NonConvergence { iterations: usize, last: f64, history: Vec<(f64, f64)> },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
