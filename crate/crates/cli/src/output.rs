//! Artifact envelope, sorted-key JSON and exit codes.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use ratio_cv::Error;
use serde::Serialize;
use serde_json::{json, Value};

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NOT_PD: u8 = 3;
pub const EXIT_ALL_FAILED: u8 = 4;

pub const TOOL: &str = "ratio-cv";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NotPositiveDefinite { .. } => EXIT_NOT_PD,
        Error::AllReplicationsFailed { .. } => EXIT_ALL_FAILED,
        Error::Io(_) | Error::Csv(_) => EXIT_FAILURE,
        _ => EXIT_CONFIG,
    }
}

/// `{"command", "config", "result", "tool", "version"}` with every object's
/// keys sorted (serde_json's default map is ordered).
pub fn artifact<C: Serialize, R: Serialize>(command: &str, config: &C, result: &R) -> Result<String, Error> {
    let value = json!({
        "tool": TOOL,
        "version": VERSION,
        "command": command,
        "config": to_value(config)?,
        "result": to_value(result)?,
    });
    let mut s = serde_json::to_string_pretty(&value).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn to_value<T: Serialize>(v: &T) -> Result<Value, Error> {
    serde_json::to_value(v).map_err(|e| Error::InvalidConfig(e.to_string()))
}

/// Writes to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}
