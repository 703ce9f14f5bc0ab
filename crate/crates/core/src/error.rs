use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed image stream. `field` names the header element or payload
    /// that failed to parse.
    #[error("PGM parse error in {field}: {message}")]
    Parse { field: &'static str, message: String },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid argument `{name}`: {message}")]
    InvalidArgument { name: &'static str, message: String },

    /// The input carries no signal the operation can work with, e.g. a
    /// constant image where a variance is required.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("registration low confidence: RMS phase residual {residual:.4} rad exceeds {threshold:.4} rad")]
    LowConfidence { residual: f64, threshold: f64 },

    #[error("sample grid is empty")]
    EmptyGrid,
}

impl Error {
    pub(crate) fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            message: message.into(),
        }
    }

    pub(crate) fn parse(field: &'static str, message: impl Into<String>) -> Self {
        Error::Parse {
            field,
            message: message.into(),
        }
    }
}
