use thiserror::Error;

/// Errors raised by the stand model and its solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of a pointwise formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter violates an invariant of its type.
    #[error("invalid parameter `{field}`: requires {requirement} (got {value})")]
    InvalidParameter {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },

    /// The boundary arc needs a thinning rate above the admissible maximum.
    #[error("infeasible boundary arc at t = {t}: required thinning {required} exceeds e_max = {e_max}")]
    InfeasibleBoundary { t: f64, required: f64, e_max: f64 },

    /// The state cannot be kept inside the validity domain.
    #[error("non-viable state at t = {t}: {reason}")]
    NonViable { t: f64, reason: String },

    /// The density index never reaches 1 within the validity horizon.
    #[error("density index never reaches 1 before t_star = {t_star}")]
    NoCrossing { t_star: f64 },

    /// The boundary arc never reaches the minimum tree count within the validity horizon.
    #[error("minimum tree count is not reached on the boundary arc before t_star = {t_star}")]
    NoReach { t_star: f64 },

    /// A threshold is undefined for this growth function.
    #[error("undefined quantity: {0}")]
    Undefined(String),

    /// Every candidate of a search left the validity domain.
    #[error("no feasible policy among {candidates} candidates")]
    NoFeasiblePolicy { candidates: usize },

    /// A root finder could not bracket or converge.
    #[error("root finding failed: {0}")]
    RootFinding(String),

    /// Scenario file could not be parsed or validated.
    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(field: &'static str, requirement: &'static str, value: f64) -> Self {
        Error::InvalidParameter {
            field,
            requirement,
            value,
        }
    }
}
