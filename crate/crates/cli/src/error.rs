use thiserror::Error;

/// Exit codes:
///
/// | code | meaning                                                         |
/// |------|-----------------------------------------------------------------|
/// | 0    | success                                                         |
/// | 1    | usage, configuration, unknown profile or mismatched file sets   |
/// | 2    | reading or writing an image or report failed                    |
/// | 3    | training diverged (non-finite loss)                             |
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Divergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Io(_) => 2,
            CliError::Divergence(_) => 3,
        }
    }
}

impl From<fm2s::Error> for CliError {
    fn from(e: fm2s::Error) -> Self {
        use fm2s::Error as E;
        let msg = e.to_string();
        match e {
            E::Divergence { .. } => CliError::Divergence(msg),
            E::InvalidParameter(_) => CliError::Config(msg),
            E::Io { .. }
            | E::Decode { .. }
            | E::Encode { .. }
            | E::UnsupportedFormat { .. }
            | E::DimensionMismatch(_)
            | E::InvalidImage(_) => CliError::Io(msg),
        }
    }
}
