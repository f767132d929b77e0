use thiserror::Error;

use crate::netio::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("variable `{var}` has no state `{state}`")]
    UnknownState { var: String, state: String },

    #[error("variable id {0} is out of range")]
    VariableOutOfRange(usize),

    #[error("malformed network: {0}")]
    Structure(String),

    #[error("malformed factor: {0}")]
    Factor(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("enumeration needs {required} joint states, cap is {cap}")]
    EnumerationCap { required: u128, cap: u128 },

    #[error("induced width {width} exceeds the cap of {cap}")]
    WidthCap { width: usize, cap: usize },

    #[error("evidence has probability zero")]
    InconsistentEvidence,

    #[error("evidence has probability zero in the {0} network")]
    ZeroEvidence(&'static str),

    #[error("edge {parent} -> {child} appears more than once")]
    DuplicateEdge { parent: String, child: String },

    #[error("{parent} -> {child} is not an edge of the network")]
    NotAnEdge { parent: String, child: String },

    #[error("{parent} -> {child} is not an equivalence edge")]
    NotEquivalenceEdge { parent: String, child: String },

    #[error("invalid edge parameters for {edge}: {reason}")]
    EdgeParams { edge: String, reason: String },

    #[error("degenerate update: all-zero derivatives for edge {0}")]
    DegenerateUpdate(String),

    #[error("approximate network assigns zero probability to the augmented evidence")]
    InconsistentApproximation,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("target width {target} is infeasible: deleting every edge leaves width {best}")]
    InfeasibleWidth { target: usize, best: usize },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by hitting a configured size limit rather than bad input.
    pub fn is_capacity(&self) -> bool {
        matches!(self, Error::EnumerationCap { .. } | Error::WidthCap { .. })
    }
}
