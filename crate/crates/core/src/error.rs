use thiserror::Error;

/// Errors raised by the evidence engine.
///
/// Validation problems on a table are normally *returned* in a
/// [`ValidationReport`](crate::study::ValidationReport); they only become an
/// [`Error::Validation`] when a caller needs a fully valid value (for example
/// while parsing a study file).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("validation failed: {}", .violations.join("; "))]
    Validation { violations: Vec<String> },

    #[error("design error: {0}")]
    Design(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("covariate mismatch: study uses {expected:?}, profile uses {found:?}")]
    CovariateMismatch { expected: Vec<String>, found: Vec<String> },

    #[error("no stratum matches the requested profile; available: {}", .available.join(" | "))]
    NoMatch { available: Vec<String> },

    #[error("strata disagree on study design")]
    MixedDesign,

    #[error("misclassification correction is infeasible: corrected cell `{cell}` = {value}")]
    InfeasibleCorrection { cell: String, value: f64 },

    #[error("at least 2 studies are required, got {0}")]
    InsufficientStudies(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("expected exactly 10 checklist outcomes with ids 1..=10, got {0}")]
    Arity(usize),

    #[error("sub-additive joint exposure: rr_as = {rr_as} < rr_a + rr_s - 1 = {additive}")]
    NegativeInteraction { rr_as: f64, additive: f64 },

    #[error("liability weights are all zero or invalid")]
    DegenerateWeights,

    #[error("every company has zero probability mass")]
    AllZeroMass,

    #[error("composite risk {risk} in stratum `{stratum}` is outside (0, 1)")]
    RiskOverflow { stratum: String, risk: f64 },

    #[error("table total {0} exceeds the enumeration bound of 10000")]
    EnumerationBound(u64),
}

pub type Result<T> = std::result::Result<T, Error>;
