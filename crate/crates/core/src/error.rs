use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("segment horizon {got} does not match model delay {expected}")]
    DomainMismatch { expected: f64, got: f64 },

    #[error("expression error: {0}")]
    Expression(String),

    #[error("speed {c} is below the critical speed: no real characteristic roots")]
    Subcritical { c: f64 },

    #[error("critical speed search failed: {0}")]
    CriticalSpeed(String),

    #[error("contour passes too close to a zero of χ after {attempts} perturbations")]
    ContourTooClose { attempts: usize },

    #[error("winding number is not close to an integer ({0})")]
    NonIntegerWinding(f64),

    #[error("profile solution has not converged")]
    NotConverged,

    #[error("fit error: {0}")]
    Fit(String),

    #[error("evolution error: {0}")]
    Evolution(String),
}

pub type Result<T> = std::result::Result<T, Error>;
