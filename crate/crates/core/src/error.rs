use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// Excitation sectors below m = 2 are not three-dimensional.
    #[error("invalid sector index m = {0}; sectors start at m = 2")]
    InvalidSector(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The bordered linear system hit a vanishing pivot or produced
    /// non-finite values.
    #[error("steady-state solve failed at n_max = {n_max}: {reason}")]
    SolverFailure { n_max: usize, reason: String },

    #[error("no convergence: {0}")]
    NonConvergence(String),
}
