use crate::data::Label;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("invalid premise: {0}")]
    Premise(String),

    #[error("merge undefined across classes ({0} vs {1})")]
    ConsequentMismatch(Label, Label),

    #[error("not affinely generalizable: {0}")]
    NotAffine(String),

    #[error("parameter {value} outside [{lo}, {hi}]")]
    ParamOutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("training failed: {0}")]
    Training(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Oracle(#[from] OracleError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Failures talking to a black box.
#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("label out of domain: `{0}`")]
    LabelOutOfDomain(String),

    #[error("malformed response: `{0}`")]
    Malformed(String),

    #[error("oracle timed out")]
    Timeout,

    #[error("transport failure: {0}")]
    Transport(String),
}

impl From<std::io::Error> for OracleError {
    fn from(e: std::io::Error) -> Self {
        match e.kind() {
            std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut => OracleError::Timeout,
            _ => OracleError::Transport(e.to_string()),
        }
    }
}
