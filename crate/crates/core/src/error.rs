use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed spec/config JSON. `path` is the JSON field path when known.
    #[error("{context}: {message} (field `{path}`, line {line}, column {column})")]
    Parse {
        context: &'static str,
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid fixed-point format: {0}")]
    Format(String),

    #[error("cannot quantize NaN")]
    NaN,

    #[error("fixed-point format mismatch: {lhs} vs {rhs}")]
    FormatMismatch { lhs: String, rhs: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("graph file: {0}")]
    GraphFile(String),

    #[error("weights: {0}")]
    Weights(String),

    #[error("model spec is invalid: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),

    #[error("{0}")]
    Infeasible(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("code generation: {0}")]
    Codegen(String),

    #[error("testbench build failed:\n{0}")]
    Build(String),

    #[error("missing metric file {0}")]
    MissingMetric(PathBuf),

    #[error("performance model: {0}")]
    Model(String),

    #[error("design space: {0}")]
    Space(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn from_path_err(context: &'static str, err: serde_path_to_error::Error<serde_json::Error>) -> Self {
        let path = err.path().to_string();
        let inner = err.into_inner();
        Error::Parse {
            context,
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    }
}

/// Deserialize JSON, reporting the offending field path on failure.
pub(crate) fn from_json_str<T: serde::de::DeserializeOwned>(context: &'static str, text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| Error::from_path_err(context, e))?;
    de.end().map_err(|e| Error::Parse {
        context,
        path: ".".into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(value)
}
