use thiserror::Error;

#[derive(Debug, Error)]
pub enum CmdpError {
    #[error("index out of range: {what} = {index} (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("instance failed validation: {0}")]
    InvalidInstance(String),

    #[error("transition mass at (h={h}, s={s}, a={a}) is {mass}, expected 1")]
    CorruptTransition { h: usize, s: usize, a: usize, mass: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invariant `{name}` violated at episode {episode}: {detail}")]
    Invariant {
        name: &'static str,
        episode: usize,
        detail: String,
    },

    #[error("constraint infeasible: max V^g(s1) = {max_value} < b = {threshold}")]
    Infeasible { max_value: f64, threshold: f64 },

    #[error("instance too large for enumeration: {0} deterministic policies")]
    TooLarge(u128),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path} line {line}: {reason}")]
    Csv {
        path: String,
        line: usize,
        reason: String,
    },
}

pub type Result<T> = std::result::Result<T, CmdpError>;

pub(crate) fn check_index(what: &'static str, index: usize, limit: usize) -> Result<()> {
    if index < limit {
        Ok(())
    } else {
        Err(CmdpError::IndexOutOfRange { what, index, limit })
    }
}
