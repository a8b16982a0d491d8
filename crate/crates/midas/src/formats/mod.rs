//! On-disk formats. Every reader has a `parse_*` form over text, which
//! names the origin in errors, and a `read_*` form over a path.

pub mod corpus;
pub mod examples;
pub mod mapping;
pub mod scheme;
pub mod swda;

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Version written into every line-delimited record.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{origin}: {source}")]
    Io { origin: String, source: std::io::Error },
    #[error("{origin}:{line}: {msg}")]
    Parse { origin: String, line: usize, msg: String },
    #[error("{origin}: {msg}")]
    Invalid { origin: String, msg: String },
}

impl FileError {
    pub(crate) fn parse(origin: &str, line: usize, msg: impl ToString) -> Self {
        FileError::Parse { origin: origin.into(), line, msg: msg.to_string() }
    }

    pub(crate) fn invalid(origin: &str, msg: impl ToString) -> Self {
        FileError::Invalid { origin: origin.into(), msg: msg.to_string() }
    }
}

pub fn read_text(path: &Path) -> Result<String, FileError> {
    fs::read_to_string(path).map_err(|source| FileError::Io { origin: path.display().to_string(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), FileError> {
    fs::write(path, text).map_err(|source| FileError::Io { origin: path.display().to_string(), source })
}

/// Non-blank lines with 1-based line numbers.
pub(crate) fn content_lines(src: &str) -> impl Iterator<Item = (usize, &str)> {
    src.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty())
}

/// Parses one JSON value per non-blank line.
pub fn parse_jsonl<T: DeserializeOwned>(src: &str, origin: &str) -> Result<Vec<(usize, T)>, FileError> {
    content_lines(src)
        .map(|(n, l)| serde_json::from_str(l).map(|v| (n, v)).map_err(|e| FileError::parse(origin, n, e)))
        .collect()
}

pub fn render_jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item).expect("serializable"));
        out.push('\n');
    }
    out
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FileError> {
    let origin = path.display().to_string();
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| FileError::parse(&origin, e.line(), e))
}

/// Compact JSON plus a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FileError> {
    let mut text = serde_json::to_string(value).expect("serializable");
    text.push('\n');
    write_text(path, &text)
}

/// Tab-separated fields may not hold tabs or newlines; these escapes keep
/// one record per line.
pub(crate) fn escape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub(crate) fn unescape_field(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => return Err(format!("bad escape `\\{}`", other.map(String::from).unwrap_or_default())),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escapes_round_trip() {
        for s in ["", "plain", "a\tb", "x\\ty", "line\nbreak\r", "\\"] {
            assert_eq!(unescape_field(&escape_field(s)).unwrap(), s);
            assert!(!escape_field(s).contains(['\t', '\n']));
        }
        assert!(unescape_field("bad\\q").is_err());
        assert!(unescape_field("end\\").is_err());
    }
}
