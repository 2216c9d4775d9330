//! Flat `key = value` text shared by the CLI and the service.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

/// Parses `key = value` lines in order. Blank lines and lines starting with
/// `#` are skipped.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, ParseError> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ParseError {
            line: k + 1,
            message: format!("expected key = value, got {line:?}"),
        })?;
        let key = key.trim();
        if key.is_empty() || key.starts_with('-') || key.contains(char::is_whitespace) {
            return Err(ParseError { line: k + 1, message: format!("bad key {key:?}") });
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}
