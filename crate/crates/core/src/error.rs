use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The reachability system of a policy-induced chain is singular: some
    /// non-terminal states never reach a terminal state.
    #[error("non-absorbing under policy: recurrent states {}", .states.join(", "))]
    NonAbsorbing { states: Vec<String> },

    #[error("policy space exceeds cap: {count} policies > {cap}")]
    PolicySpaceTooLarge { count: u128, cap: u128 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("linear system is singular")]
    Singular,

    #[error("fixed-point iteration did not reach tolerance after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
