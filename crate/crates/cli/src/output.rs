//! Deterministic text rendering and all-or-nothing file output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const TOOL: &str = "hme";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fixed-width scientific format used for every number in CSV output.
pub fn num(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.17e}")
}

/// Hex SHA-256 of the compact JSON serialization.
pub fn hash_of<S: Serialize>(value: &S) -> CliResult<String> {
    let bytes = serde_json::to_vec(value)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

/// Comment lines opening every CSV file.
pub fn csv_header(command: &str, config: &Value, extra: &[(&str, String)]) -> CliResult<String> {
    let mut s = String::new();
    writeln!(s, "# {TOOL} {VERSION}").ok();
    writeln!(s, "# command: {command}").ok();
    writeln!(s, "# config: {}", serde_json::to_string(config)?).ok();
    for (k, v) in extra {
        writeln!(s, "# {k}: {v}").ok();
    }
    Ok(s)
}

/// JSON document with the tool, command and config echo ahead of `body`.
pub fn json_document(command: &str, config: &Value, body: Value) -> CliResult<String> {
    let mut doc = json!({
        "tool": TOOL,
        "version": VERSION,
        "command": command,
        "config": config,
    });
    if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
        d.extend(b);
    }
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn vector_rows(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

/// `# matrix: name rows=R cols=C` followed by comma-separated rows.
pub fn csv_matrix(name: &str, m: &DMatrix<f64>) -> String {
    let mut s = format!("# matrix: {name} rows={} cols={}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|&x| num(x)).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Writes `content` to `path` through a temporary file in the same
/// directory, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, content: &str) -> CliResult<()> {
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())?;
            out.flush()?;
            Ok(())
        }
        Some(p) => {
            let dir = parent_dir(p);
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(content.as_bytes())?;
            tmp.flush()?;
            tmp.persist(p).map_err(|e| CliError::invalid(format!("cannot write {}: {}", p.display(), e.error)))?;
            Ok(())
        }
    }
}

/// Creates directory `path` holding `files`, assembling it next to the
/// target first. An existing nonempty directory is refused.
pub fn emit_dir(path: &Path, files: &[(String, String)]) -> CliResult<()> {
    if path.exists() {
        let empty = path.is_dir() && std::fs::read_dir(path)?.next().is_none();
        if !empty {
            return Err(CliError::invalid(format!("output {} exists and is not an empty directory", path.display())));
        }
    }
    let staging = tempfile::Builder::new().prefix(".hme-").tempdir_in(parent_dir(path))?;
    for (name, content) in files {
        std::fs::write(staging.path().join(name), content)?;
    }
    if path.exists() {
        std::fs::remove_dir(path)?;
    }
    let staged = staging.keep();
    std::fs::rename(&staged, path).map_err(|e| {
        let _ = std::fs::remove_dir_all(&staged);
        CliError::invalid(format!("cannot create {}: {e}", path.display()))
    })
}

fn parent_dir(p: &Path) -> &Path {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    }
}
