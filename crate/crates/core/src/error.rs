use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid domain specification: {0}")]
    DomainSpec(String),
    #[error("lipschitz bound violated: declared {declared}, observed {observed}")]
    Lipschitz { declared: f64, observed: f64 },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("rearrangement failed: {0}")]
    Rearrangement(String),
    #[error("mesh has {nodes} unknowns, limit is {limit}")]
    MeshTooLarge { nodes: usize, limit: usize },
    #[error("solver did not converge: {0}")]
    Solver(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("falsification tripwire: {0}")]
    Tripwire(String),
}

pub type Result<T> = std::result::Result<T, Error>;
