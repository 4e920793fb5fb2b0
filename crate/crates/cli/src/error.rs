use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, specs or missing inputs; exit 2.
    #[error("{0}")]
    Usage(String),
    /// Failures after the configuration was accepted; exit 1.
    #[error(transparent)]
    Numerical(#[from] specrkhs::Error),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Numerical(_) | Self::Io { .. } => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Usage(_) => "usage",
            Self::Numerical(specrkhs::Error::Io(_)) | Self::Io { .. } => "io",
            Self::Numerical(_) => "numerical",
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({ "error": { "kind": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() } })
    }
}

/// Spec-parsing failures from the library are usage errors.
pub fn usage(e: specrkhs::Error) -> CliError {
    CliError::Usage(e.to_string())
}
