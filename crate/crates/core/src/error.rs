use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter or configuration field violates its invariant.
    #[error("{field}: {message}")]
    Param { field: String, message: String },

    /// Input data (trace rows, timelines) is malformed or out of order.
    #[error("input error at line {line}: {message}")]
    Input { line: usize, message: String },

    /// A derived quantity left the region where the model is meaningful.
    #[error("model inconsistency: {0}")]
    Model(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn param(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Param {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn input(line: usize, message: impl Into<String>) -> Self {
        Error::Input {
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Prefix the field path of a parameter error, leaving other kinds untouched.
    pub fn within(self, prefix: &str) -> Self {
        match self {
            Error::Param { field, message } => Error::Param {
                field: if field.is_empty() {
                    prefix.to_string()
                } else {
                    format!("{prefix}.{field}")
                },
                message,
            },
            other => other,
        }
    }
}
