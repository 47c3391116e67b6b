use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("state space has {count} states, above the cap of {cap}; use Monte Carlo instead")]
    CardinalityExceeded { count: u128, cap: u128 },

    #[error("no agent of population {population} plays action slot {slot}")]
    EmptySlot { population: usize, slot: usize },

    #[error("potential is constant ({value}); normalization is undefined")]
    DegeneratePotential { value: f64 },

    #[error("dynamic {0} has no closed-form stationary distribution")]
    UnsupportedDynamic(&'static str),

    #[error("{stage} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        stage: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error(
        "uniformization needs {needed} terms, above the cap of {cap}; split the time interval"
    )]
    TruncationOverflow { needed: usize, cap: usize },

    #[error("distance to stationarity still above {eps} at time {time}")]
    NotMixed { eps: f64, time: f64 },

    #[error("target {target} is above the stationary expectation {stationary}")]
    Unreachable { target: f64, stationary: f64 },

    #[error("fraction {fraction} of max welfare is not reachable (best {best} at beta={beta})")]
    Infeasible { fraction: f64, best: f64, beta: f64 },

    #[error("entropy functional is zero (constant function)")]
    ZeroEntropy,

    #[error("support violation at state {index}: mu={mu:e}, nu=0")]
    SupportViolation { index: usize, mu: f64 },

    #[error("distribution invalid: {0}")]
    InvalidDistribution(String),

    #[error("departure would empty population {population} at time {time}")]
    EmptyPopulation { population: usize, time: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error at {key}{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config {
        key: String,
        line: Option<usize>,
        message: String,
    },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
