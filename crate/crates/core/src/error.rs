use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed HAR document at byte {offset}: {message}")]
    HarSyntax { offset: usize, message: String },

    #[error("malformed HAR entry {index}: {message}")]
    HarEntry { index: usize, message: String },

    #[error("line {line}: {message}")]
    JsonlLine { line: usize, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no labeled records to evaluate against")]
    NoLabeledData,
}
