use std::path::Path;

use axum::http::StatusCode;
use idiom_graph_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {file}: field `{field}`: {message}")]
    Config { file: String, field: String, message: String },
    #[error("missing or unknown bearer token")]
    Unauthorized,
    #[error("forbidden: {0}")]
    Forbidden(String),
    #[error("idempotency key {0:?} was already used for a different request")]
    IdempotencyMismatch(String),
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

impl ServiceError {
    pub fn io(context: impl AsRef<Path>, source: std::io::Error) -> Self {
        Self::Io { context: context.as_ref().display().to_string(), source }
    }

    /// Process exit code: 2 for I/O trouble, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Io { .. } | Self::Core(CoreError::Io { .. }) => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Core(e) => match e {
                CoreError::Validation(_) => "validation",
                CoreError::Policy(_) => "policy",
                CoreError::Conflict(_) => "conflict",
                CoreError::Type(_) => "type",
                CoreError::NotFound(_) => "not_found",
                CoreError::State(_) => "state",
                CoreError::Parse { .. } => "parse",
                CoreError::Proposer { .. } => "proposer",
                CoreError::Io { .. } => "io",
            },
            Self::Io { .. } => "io",
            Self::Config { .. } => "config",
            Self::Unauthorized => "unauthorized",
            Self::Forbidden(_) => "forbidden",
            Self::IdempotencyMismatch(_) => "idempotency_mismatch",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            Self::Core(e) => match e {
                CoreError::NotFound(_) => StatusCode::NOT_FOUND,
                CoreError::Conflict(_) | CoreError::State(_) => StatusCode::CONFLICT,
                CoreError::Proposer { .. } => StatusCode::BAD_GATEWAY,
                CoreError::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
                _ => StatusCode::UNPROCESSABLE_ENTITY,
            },
            Self::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            Self::Config { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            Self::Unauthorized => StatusCode::UNAUTHORIZED,
            Self::Forbidden(_) => StatusCode::FORBIDDEN,
            Self::IdempotencyMismatch(_) => StatusCode::CONFLICT,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "error": { "kind": self.kind(), "message": self.to_string() } })
    }
}

/// Deserializes JSON, reporting the path of the offending field.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let location = if path == "." { what.to_owned() } else { format!("{what} field `{path}`") };
        CoreError::Parse { location, message: e.into_inner().to_string() }.into()
    })
}
