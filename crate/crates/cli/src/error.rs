use std::fmt;
use std::path::PathBuf;

/// Coarse failure class, printed to stderr and mapped to the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Io,
    Numerical,
    Unsupported,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::Io => "io",
            Category::Numerical => "numerical",
            Category::Unsupported => "unsupported",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 2,
            Category::Io => 3,
            Category::Numerical => 4,
            Category::Unsupported => 5,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot parse config file {path}: {source}")]
    ConfigFile {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Numerical(#[from] llweak::Error),
    #[error("{0}")]
    Unsupported(String),
}

impl CliError {
    pub fn category(&self) -> Category {
        match self {
            CliError::Config(_) | CliError::ConfigFile { .. } => Category::Config,
            CliError::Io { .. } | CliError::Csv(_) => Category::Io,
            CliError::Numerical(_) => Category::Numerical,
            CliError::Unsupported(_) => Category::Unsupported,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
