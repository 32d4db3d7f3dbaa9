use thiserror::Error;

/// Errors produced by the toolkit.
///
/// Solver non-convergence is deliberately *not* an error: iterative solvers
/// return a flagged result with diagnostics instead (see
/// [`crate::weakkam::WeakKamResult::converged`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("model '{label}' failed Tonelli validation: {reason}")]
    NonTonelli { label: String, reason: String },

    #[error("momentum window too small: argmax on the boundary at x={x:?}, v={v:?}")]
    MomentumWindowTooSmall { x: Vec<f64>, v: Vec<f64> },

    #[error("tau too small for grid: one-step band is empty")]
    TauTooSmallForGrid,

    #[error("band overflow: refine grid or shorten horizon")]
    BandOverflow,

    #[error("grid too large for the dense oracle ({nodes} nodes > {max} allowed)")]
    GridTooLargeForOracle { nodes: usize, max: usize },

    #[error("empty Aubry mask: threshold too small or alpha wrong")]
    EmptyAubryMask,

    #[error("seed is not a subsolution (violation {violation:.3e} exceeds 10x tolerance {tol:.3e})")]
    SeedNotSubsolution { violation: f64, tol: f64 },

    #[error("file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
