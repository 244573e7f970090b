use thiserror::Error;

/// Errors produced by grid construction, the discrete operators, and the solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("n_per_axis must be at least 2, got {0}")]
    TooFewIntervals(usize),

    #[error("degenerate bounds: lower {lo} must lie strictly below upper {hi}")]
    DegenerateBounds { lo: f64, hi: f64 },

    #[error("unsupported stencil width {0}; supported widths are 1, 2, 3")]
    UnsupportedWidth(u8),

    #[error("stencil foot leaves the closed domain at node {node} along ({dx},{dy})")]
    ClippedStencil { node: usize, dx: i32, dy: i32 },

    #[error("no stencil pair available at node {0}")]
    NoAvailablePair(usize),

    #[error("unknown problem '{key}'; available problems: {available}")]
    UnknownProblem { key: String, available: String },

    #[error("grid function does not live on a grid compatible with the problem domain")]
    GridMismatch,

    #[error("non-finite value detected at iteration {iter}; aborting solve")]
    NonFinite { iter: usize },

    #[error("comparison precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("problem has no exact solution attached")]
    MissingExactSolution,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
