use thiserror::Error;

/// Errors produced by the offloading toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter fitting failed: {0}")]
    Fit(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The tuple space of a k-hop delivery estimate exceeds the configured cap.
    #[error("problem too large: {tuples} contact-count tuples exceed the cap of {cap}")]
    Complexity { tuples: u128, cap: u64 },

    #[error("network generation failed: {0}")]
    Generation(String),

    #[error("trace ingestion failed: {0}")]
    Ingestion(String),

    #[error("planning failed: {0}")]
    Plan(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("instance too large: {0}")]
    InstanceTooLarge(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown node {0}")]
    UnknownNode(usize),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// Stable machine-readable identifier, used by the CLI diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Fit(_) => "E_FIT",
            Error::Numeric(_) => "E_NUMERIC",
            Error::Domain(_) => "E_DOMAIN",
            Error::Complexity { .. } => "E_COMPLEXITY",
            Error::Generation(_) => "E_GENERATION",
            Error::Ingestion(_) => "E_INGESTION",
            Error::Plan(_) => "E_PLAN",
            Error::Protocol(_) => "E_PROTOCOL",
            Error::Contract(_) => "E_CONTRACT",
            Error::InstanceTooLarge(_) => "E_TOO_LARGE",
            Error::Config(_) => "E_CONFIG",
            Error::UnknownNode(_) => "E_UNKNOWN_NODE",
            Error::Io(_) => "E_IO",
            Error::Format(_) => "E_FORMAT",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
