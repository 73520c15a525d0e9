use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The modulus of a field vanished (below the guard floor) at a grid node.
    #[error("degenerate modulus |u| = {modulus:e} at node (lat {lat}, lon {lon})")]
    Degeneracy { lat: usize, lon: usize, modulus: f64 },

    #[error("degree is ill-defined: Jacobian integral {value} is not within 0.1 of an integer")]
    IllDefinedDegree { value: f64 },

    #[error("ambiguous alignment: moment matrix singular values {0:?}")]
    AmbiguousAlignment([f64; 3]),

    #[error("no convergence after {iterations} iterations (best objective {best:e})")]
    Convergence { iterations: usize, best: f64 },

    #[error("Newton refinement failed: {0}")]
    Refinement(String),
}

pub type Result<T> = std::result::Result<T, Error>;
