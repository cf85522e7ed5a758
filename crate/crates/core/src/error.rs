use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid {measure} measure: {reason}")]
    InvalidMeasure { measure: &'static str, reason: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid selection kernel: {}", .0.join("; "))]
    InvalidSelection(Vec<String>),

    #[error("{op}: {reason}")]
    OperatorDomain { op: &'static str, reason: String },

    #[error("hypergeometric pairing with {total} balls is too large for exact pmf (limit {limit})")]
    TooLargeForExactPmf { total: usize, limit: usize },

    #[error("cannot step an absorbed dual state")]
    Absorbed,

    #[error(
        "line count reached {lines} (limit {limit}); branching plus environment is probably \
         not dominated by coalescence plus mutation, check the recurrence condition"
    )]
    Explosion { lines: usize, limit: usize },

    #[error("recurrence condition fails (b = {b}, mu = {mu}, c = {c}, nu = {nu}, theta = {theta})")]
    AssumptionViolated { b: f64, mu: f64, c: f64, nu: f64, theta: f64 },

    #[error("{0} requires a model without mutations")]
    MutationsPresent(&'static str),

    #[error("{0} requires individual or coordinated mutations")]
    NoMutations(&'static str),

    #[error("moment table covers k <= {available}, need k <= {needed}")]
    InsufficientMoments { needed: usize, available: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
