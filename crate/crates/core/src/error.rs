use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Inputs with inconsistent or unsupported dimensions.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Model assumptions violated (e.g. no intercept root found).
    #[error("model error: {0}")]
    Model(String),

    /// Numerical procedure failed to converge or met an invalid sign.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A resource level was queried beyond the tabulated boundary range.
    #[error(
        "coverage error: resource level {requested} exceeds boundary table coverage {available}; \
         rebuild the boundary with a larger y_max"
    )]
    Coverage { requested: f64, available: f64 },

    /// A state lies outside the domain required by the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The reflection scheme exceeded its push budget.
    #[error("scheme error: {0}")]
    Scheme(String),

    /// Reflection geometry failed a compatibility condition.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// A hypothesis required by an analytic statement does not hold.
    #[error("hypothesis error: {0}")]
    Hypothesis(String),

    /// A requested strategy perturbation is not admissible.
    #[error("inadmissible perturbation: {0}")]
    Inadmissible(String),
}

pub type Result<T> = std::result::Result<T, Error>;
