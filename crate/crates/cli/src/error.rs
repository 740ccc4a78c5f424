use serde_json::json;
use thiserror::Error;

/// Exit code for invalid input.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for numerical failures.
pub const EXIT_NUMERIC: i32 = 3;
/// Exit code when a self-check fails.
pub const EXIT_VERIFY: i32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}", config_message(.field, .message))]
    Config { field: Option<String>, message: String },

    #[error(transparent)]
    Core(#[from] viscobeam::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0} check(s) failed")]
    VerifyFailed(usize),
}

fn config_message(field: &Option<String>, message: &str) -> String {
    match field {
        Some(f) => format!("{f}: {message}"),
        None => message.to_string(),
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Io { .. } => EXIT_CONFIG,
            CliError::Core(e) if e.is_config() => EXIT_CONFIG,
            CliError::Core(_) => EXIT_NUMERIC,
            CliError::VerifyFailed(_) => EXIT_VERIFY,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Core(e) if e.is_config() => "config",
            CliError::Core(_) => "numerical",
            CliError::Io { .. } => "io",
            CliError::VerifyFailed(_) => "verify",
        }
    }

    /// One-line JSON report for stderr.
    pub fn to_json(&self) -> String {
        let field = match self {
            CliError::Config { field, .. } => field.clone(),
            _ => None,
        };
        json!({
            "error": self.kind(),
            "field": field,
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
        .to_string()
    }
}

pub fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}
