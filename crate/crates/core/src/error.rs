use thiserror::Error;

/// Errors raised while turning source text into an expression tree.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("undeclared variable `{name}` at byte {offset}")]
    UndeclaredVariable { offset: usize, name: String },
    #[error("holomorphy violation: conjugate variable `{name}` at byte {offset} is not allowed in a holomorphic context")]
    HolomorphyViolation { offset: usize, name: String },
}

/// Errors raised while evaluating an expression over a scalar algebra.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero in `{subexpr}`")]
    DivisionByZero { subexpr: String },
    #[error("singular input of `{func}` in `{subexpr}`")]
    SingularFunction { func: &'static str, subexpr: String },
    #[error("unbound variable `{name}`")]
    UnboundVariable { name: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular metric tensor (|det| = {det:.3e})")]
    SingularMetric { det: f64 },
    #[error("singular chart Jacobian (|det| = {det:.3e})")]
    SingularJacobian { det: f64 },
    #[error("anchor rank {found} differs from required rank {required} at the sample point")]
    AnchorRank { required: usize, found: usize },
    #[error("reality check failed: |Im L| = {imag:.3e} exceeds {tol:.1e} at a sample point")]
    RealityCheck { imag: f64, tol: f64 },
    #[error("metric is not positive definite; orthonormal completion is impossible")]
    NonPositiveMetric,
    #[error("unsupported input: {0}")]
    UnsupportedInput(String),
    #[error("non-finite state during integration; last valid t = {t_last}")]
    NonFiniteState { t_last: f64 },
    #[error("trajectory entered a singular locus ball at t = {t}")]
    SingularityProximity { t: f64 },
    #[error("connection coefficients are evaluator-backed; `{op}` needs expression coefficients")]
    NeedsExpressionCoeffs { op: &'static str },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
