use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A record in an input log could not be decoded.
    #[error("line {line}: field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("invalid value for `{field}`: {message}")]
    InvalidValue { field: String, message: String },

    #[error("records from several frames passed to a single-frame operation (frames {first} and {other})")]
    MixedFrames { first: u64, other: u64 },

    #[error("series of length {len} is too short for a window of {needed}")]
    SeriesTooShort { len: usize, needed: usize },

    #[error("series lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("no values to summarise")]
    Empty,
}

impl Error {
    pub(crate) fn parse(line: usize, field: &str, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(field: &str, message: impl Into<String>) -> Self {
        Error::InvalidValue {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// True for errors caused by the shape of otherwise valid data
    /// (alignment, length) rather than by malformed input.
    pub fn is_semantic(&self) -> bool {
        matches!(
            self,
            Error::SeriesTooShort { .. } | Error::LengthMismatch { .. } | Error::MixedFrames { .. } | Error::Empty
        )
    }
}
