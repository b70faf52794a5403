use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("jets have different variable layouts")]
    LayoutMismatch,
    #[error("composition needs an inner jet with zero constant term (inner {index} has constant {constant})")]
    ConstantTerm { index: usize, constant: String },
    #[error("variable index {index} out of range for {nvars} variables")]
    VariableIndex { index: usize, nvars: usize },
    #[error("cannot parse rational {0:?}")]
    ParseRational(String),
    #[error("indeterminate splitting: {0}")]
    IndeterminateSplitting(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("resonant parameter extension: {0}")]
    ResonantExtension(String),
    #[error("no norm scale: {0}")]
    NoNormScale(String),
    #[error("resonance obstruction at order {order}: monomial {monomial}")]
    Resonance { order: u32, monomial: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("not a contraction on this box: {0}")]
    NotContraction(String),
    #[error("missing constant: {0}")]
    MissingConstant(String),
    #[error("Newton iteration failed: {0}")]
    Newton(String),
    #[error("convergence budget exhausted: {0}")]
    Budget(String),
    #[error("certification failed at stage {stage}: {detail}")]
    Certification { stage: String, detail: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
