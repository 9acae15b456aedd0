use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: syntax error at `{token}`: {reason}")]
    Syntax {
        line: usize,
        token: String,
        reason: String,
    },
    #[error("line {line}: duplicate element name `{name}`")]
    DuplicateElement { line: usize, name: String },
    #[error("line {line}: unknown directive `{directive}`")]
    UnknownDirective { line: usize, directive: String },
    #[error("line {line}: element `{name}` has non-positive value {value}")]
    NonPositiveValue {
        line: usize,
        name: String,
        value: f64,
    },
    #[error("invalid piecewise-linear waveform: {0}")]
    InvalidPwl(String),
    #[error("invalid mesh specification: {0}")]
    InvalidMesh(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is singular at pivot column {column}")]
    Singular { column: usize },
    #[error("non-finite matrix entry")]
    NonFinite,

    #[error("node `{0}` has no connection to ground")]
    FloatingNode(String),
    #[error("loop of inductors/voltage sources through element `{0}`")]
    SourceLoop(String),
    #[error("DC matrix G is singular at `{0}` (node isolated by capacitors?)")]
    SingularDc(String),
    #[error("netlist has no independent source")]
    NoSource,

    #[error("step size must be positive, got {0}")]
    InvalidStep(f64),
    #[error("C + gamma*G is singular at pivot column {column} for gamma = {gamma:e}; try another gamma")]
    SingularShift { gamma: f64, column: usize },
    #[error("input block W~ has not been set for the current step")]
    WUnset,
    #[error("Krylov start vector is zero")]
    ZeroStartVector,
    #[error("projected Hessenberg matrix is singular or ill-conditioned (m = {m})")]
    SingularHessenberg { m: usize },
    #[error("projected operator has a Ritz value outside the right half-plane (m = {m})")]
    SpuriousRitz { m: usize },
    #[error("capacitance matrix C is singular; this path requires a nonsingular C")]
    SingularC,
    #[error("no convergence at t = {t:e} s: err = {err:e} with m = {m} after step halving")]
    NonConvergence { t: f64, err: f64, m: usize },
    #[error("dense reference limited to {cap} unknowns, system has {n}")]
    SizeCap { n: usize, cap: usize },
}

impl Error {
    /// True for errors caused by the input text, its topology or the
    /// arguments rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. }
                | Error::DuplicateElement { .. }
                | Error::UnknownDirective { .. }
                | Error::NonPositiveValue { .. }
                | Error::InvalidPwl(_)
                | Error::InvalidMesh(_)
                | Error::InvalidConfig(_)
                | Error::FloatingNode(_)
                | Error::SourceLoop(_)
                | Error::NoSource
        )
    }

    /// Failures of one projected evaluation that a larger basis may cure.
    pub fn is_projection_failure(&self) -> bool {
        matches!(
            self,
            Error::SingularHessenberg { .. } | Error::SpuriousRitz { .. } | Error::NonFinite
        )
    }
}
