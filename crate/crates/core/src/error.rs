use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("shape mismatch: adjoint has {got} entries, grid has {expected}")]
    ShapeMismatch { got: usize, expected: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("all {0} events failed the projection guard")]
    DegenerateProjection(usize),

    #[error("frame is empty")]
    EmptyFrame,

    #[error("negative bin value {value} at bin {index}")]
    NegativeBinValue { index: usize, value: f64 },

    #[error("invalid event packet: {0}")]
    InvalidPacket(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::DegenerateProjection(_) => "degenerate_projection",
            Error::EmptyFrame => "empty_frame",
            Error::NegativeBinValue { .. } => "negative_bin_value",
            Error::InvalidPacket(_) => "invalid_packet",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Parse { .. } => "parse_error",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
