use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("{what}: {value} is outside the domain ({expected})")]
    Domain {
        what: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Adaptive quadrature ran out of subdivisions; the partial estimate is kept.
    #[error("quadrature did not converge after {subdivisions} subdivisions (estimate {estimate:e}, error {abs_error:e})")]
    NonConvergence {
        estimate: f64,
        abs_error: f64,
        subdivisions: usize,
    },

    #[error("integrand returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },

    /// A conditional Monte Carlo estimate saw too few conditioning events.
    #[error("only {achieved} conditioning events, {required} required")]
    InsufficientSamples { achieved: usize, required: usize },

    /// The TTC target exceeds the zero-offset TTC; no offset can satisfy it.
    #[error("TTC target {t_hat} s is above the zero-offset TTC {ttc_zero} s")]
    InfeasibleAtZeroOffset { t_hat: f64, ttc_zero: f64 },

    /// The TTC target is at or below the TTC floor; every offset satisfies it.
    #[error("TTC target {t_hat} s is at or below the TTC floor {floor} s; offset tolerance is unbounded")]
    UnboundedTolerance { t_hat: f64, floor: f64 },

    /// The side condition of the σ_l² ceiling does not hold.
    #[error("infeasible: ε̂² − (1−θ)²σᵢ² < θ²ε̂²/4 at θ = {theta}")]
    CeilingSideCondition { theta: f64 },

    /// Recovery-time bound undefined: initial variance already below the steady state,
    /// or the diffusion factor is not admissible.
    #[error("recovery bound undefined ({reason})")]
    NoRecoveryBound { reason: &'static str },

    /// The predecessor stops before the gap can close under this kinematics.
    #[error("kinematics domain: V² + 2aX = {discriminant} < 0")]
    Kinematics { discriminant: f64 },

    #[error("unsupported: {0}")]
    Unsupported(&'static str),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain {
            what,
            value,
            expected,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
