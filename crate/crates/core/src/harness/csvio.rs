//! CSV output with exact-round-trip reals.

use std::path::Path;

use crate::error::{Error, Result};

/// Shortest decimal that parses back to the same `f64`.
pub fn real(v: f64) -> String {
    format!("{v}")
}

pub fn write_table<S: AsRef<str>>(path: &Path, header: &[S], rows: &[Vec<String>]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header.iter().map(|h| h.as_ref())).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
