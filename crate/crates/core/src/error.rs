use thiserror::Error;

/// Unified error type for the crate.
///
/// Numerical routines distinguish *errors* (bad input, lost regularity at
/// start, singular linear algebra) from *statuses* (a flow that blows up or
/// leaves the chart mid-run); the latter are reported on trajectories, not
/// through this type.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("level {level} not supported: {context}")]
    Level { level: u8, context: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("parse error at byte {offset}: found {found}, expected one of {expected:?}")]
    Parse {
        offset: usize,
        found: String,
        expected: Vec<&'static str>,
    },

    #[error("unknown variable `{name}` at byte {offset}")]
    UnknownVariable { name: String, offset: usize },

    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("abs_smooth with delta = 0 evaluated within {cutoff:e} of zero with derivatives requested")]
    NonSmooth { cutoff: f64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("level mismatch: {0}")]
    LevelMismatch(String),

    #[error("singular metric: pivot {pivot:e} below tolerance")]
    SingularMetric { pivot: f64 },

    #[error("degenerate Lagrangian: fiber Hessian pivot {pivot:e} below tolerance")]
    DegenerateLagrangian { pivot: f64 },

    #[error("singular linear system: pivot {pivot:e} below tolerance")]
    SingularMatrix { pivot: f64 },

    #[error("variation family member failed: {0}")]
    VariationBlowUp(String),

    #[error("flow left the chart: {0}")]
    FlowEscaped(String),

    #[error("derivative depth exhausted for this field composition")]
    DerivativeDepth,
}

pub type Result<T> = std::result::Result<T, Error>;
