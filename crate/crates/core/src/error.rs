use thiserror::Error;

/// Errors raised while building meshes, spaces and operators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("reference error: {0}")]
    Reference(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("conditioning error: {0}")]
    Conditioning(String),
    #[error("capability error: {0}")]
    Capability(String),
    #[error("internal consistency error: {0}")]
    Internal(String),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error stems from user-supplied data (mesh files, patterns,
    /// parameters) rather than from a defect in the computation.
    pub fn is_input(&self) -> bool {
        matches!(
            self,
            Error::Input(_)
                | Error::Parse(_)
                | Error::Topology(_)
                | Error::Reference(_)
                | Error::Geometry(_)
                | Error::Domain(_)
                | Error::Capability(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
