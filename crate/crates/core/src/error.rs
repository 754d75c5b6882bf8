use thiserror::Error;

/// Failures reported by the channel model, the closed forms and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AoiError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate channel: p + r = 0 has no stationary distribution")]
    DegenerateChain,

    #[error("average AoI diverges: r = 0 makes the bad state absorbing")]
    Divergent,

    #[error(
        "unsupported erasure model (pe_good = {pe_good}, pe_bad = {pe_bad}): \
         closed forms need pe_good = 0 and pe_bad = 1, use the simulator"
    )]
    UnsupportedErasure { pe_good: f64, pe_bad: f64 },

    #[error("unstable queue: requires {condition}")]
    Unstable { condition: String },

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("simulation aborted: {0}")]
    SimulationAborted(String),
}

pub type Result<T> = std::result::Result<T, AoiError>;
