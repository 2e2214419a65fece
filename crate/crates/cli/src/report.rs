//! CSV report writing.
//!
//! Reports are plain CSV with `#` comment lines for run metadata (config
//! hash, command context, summary statistics). Floats are printed with
//! Rust's shortest round-trip formatting, so re-running a deterministic
//! command reproduces reports byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use gappy_dmap::{Error, Result};

/// Prefixes an error's message with the one-based row it arose at, keeping
/// the variant (and so the exit code) intact.
pub fn err_at_row(e: Error, row: usize) -> Error {
    match e {
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("row {row}: {m}")),
        Error::InvalidData(m) => Error::InvalidData(format!("row {row}: {m}")),
        Error::DegenerateData(m) => Error::DegenerateData(format!("row {row}: {m}")),
        Error::Numeric(m) => Error::Numeric(format!("row {row}: {m}")),
        Error::OutOfSupport(m) => Error::OutOfSupport(format!("row {row}: {m}")),
        Error::IllPosed(m) => Error::IllPosed(format!("row {row}: {m}")),
        structured => structured,
    }
}

pub struct Report {
    buf: String,
}

impl Report {
    pub fn new(config_hash: &str) -> Self {
        let mut buf = String::new();
        let _ = writeln!(buf, "# config_hash={config_hash}");
        Report { buf }
    }

    pub fn comment<V: std::fmt::Display>(&mut self, key: &str, value: V) {
        let _ = writeln!(self.buf, "# {key}={value}");
    }

    pub fn header(&mut self, columns: &[&str]) {
        let _ = writeln!(self.buf, "{}", columns.join(","));
    }

    pub fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.buf, "{}", cells.join(","));
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, &self.buf).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

pub fn cell_f64(v: f64) -> String {
    format!("{v}")
}

pub fn cell_bool(v: bool) -> String {
    if v {
        "1".into()
    } else {
        "0".into()
    }
}

/// One-based mask indices packed into a single CSV cell.
pub fn cell_mask(one_based: &[usize]) -> String {
    one_based
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(";")
}
