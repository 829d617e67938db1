//! Error-to-exit-code mapping and JSON report emission. Report schemas are
//! documented in `docs/report_schema_v1.json`; every JSON object carries
//! `schema_version`.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use ssattn::Error as CoreError;

/// CLI failure, carrying the process exit code contract:
/// 2 usage, 3 numerical, 4 I/O.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical { message: String, flags: Vec<String> },
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn io(path: &Path, message: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {message}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Numerical { message, flags } => {
                if flags.is_empty() {
                    write!(f, "{message}")
                } else {
                    write!(f, "{message} (flags: {})", flags.join(", "))
                }
            }
            CliError::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::PinvDiverged { .. } => CliError::Numerical {
                message: err.to_string(),
                flags: vec!["pinv_divergence".into()],
            },
            CoreError::NonFinite { .. } => CliError::Numerical {
                message: err.to_string(),
                flags: vec!["non_finite_value".into()],
            },
            other => CliError::Usage(other.to_string()),
        }
    }
}

/// Write pretty JSON to the given path, or to stdout when absent.
pub fn emit_json<T: Serialize>(out: Option<&PathBuf>, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serializing report: {e}")))?;
    match out {
        Some(path) => fs::write(path, text + "\n").map_err(|e| CliError::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}").map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}
