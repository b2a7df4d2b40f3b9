//! CSV output helpers: RFC-4180 field quoting and file writing.
//!
//! All emitted CSVs are UTF-8 with LF line endings, '.' decimal separators,
//! and floats printed with Rust's shortest round-trip formatting.

use std::borrow::Cow;
use std::path::Path;

use crate::error::{Error, Result};

/// Quotes a field when it contains a comma, quote, or line break.
pub fn csv_field(field: &str) -> Cow<'_, str> {
    if field.contains([',', '"', '\n', '\r']) {
        Cow::Owned(format!("\"{}\"", field.replace('"', "\"\"")))
    } else {
        Cow::Borrowed(field)
    }
}

/// Writes text to a file, mapping failures to [`Error::Io`] with the path.
pub fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path.display().to_string(), e))
}
