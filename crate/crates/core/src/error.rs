use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which of the two lists of a min-max family an index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Checks,
    Hats,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Checks => f.write_str("checks"),
            Side::Hats => f.write_str("hats"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("ordering violated between {side}[{index}] and {side}[{next}] at p={p:?}, x={x:?}", next = index + 1)]
    OrderingViolation {
        side: Side,
        index: usize,
        p: Vec<f64>,
        x: Vec<f64>,
    },

    #[error("family ordering has not been verified")]
    Unverified,

    #[error("convexity tag violation: {0}")]
    Convexity(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    Empty,

    #[error("invalid level {half_steps}/2 for a family with {len} levels")]
    InvalidLevel { half_steps: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("search box too small: contact region touches the box boundary at p={p:?}")]
    BoxTooSmall { p: Vec<f64> },

    #[error("degenerate p-grid: {n} points per axis (need at least 8)")]
    DegenerateGrid { n: usize },

    #[error("unstable pair {pair} at x={x:?}: {detail}")]
    UnstablePair { pair: String, x: Vec<f64>, detail: String },

    #[error("scheme is not monotone: {0}")]
    MonotonicityViolation(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("CFL condition violated: {0}")]
    Cfl(String),

    #[error("under-resolved: {0}")]
    UnderResolved(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("not separable: {0}")]
    NonSeparable(String),

    #[error("estimate at p={p:?}, λ={lambda}: {source}")]
    Estimate {
        p: Vec<f64>,
        lambda: f64,
        source: Box<Error>,
    },

    #[error("cannot reach strict monotonicity with constant shifts below {eps}")]
    StrictnessUnreachable { eps: f64 },
}
