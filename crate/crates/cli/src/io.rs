//! File access: JSON configs, atomic writes, CSV tables.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::{CliError, CliResult};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Reads a data file (not a config): malformed content is an IO-class error.
pub fn read_json_data<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data { path: path.to_path_buf(), reason: e.to_string() })
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("records serialize");
    out.push(b'\n');
    out
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Writes `bytes` to a temporary file beside `path`, then renames it over
/// `path`, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = parent_dir(path);
    let mut tmp = NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Fills a fresh directory through `fill` and moves it to `path` only once
/// every file is written. `path` must not exist or be an empty directory.
pub fn write_dir_atomic(path: &Path, fill: impl FnOnce(&Path) -> CliResult<()>) -> CliResult<()> {
    if path.exists() {
        let mut entries = fs::read_dir(path).map_err(|e| CliError::io(path, e))?;
        if entries.next().is_some() {
            return Err(CliError::io(path, std::io::Error::new(std::io::ErrorKind::AlreadyExists, "output directory is not empty")));
        }
        fs::remove_dir(path).map_err(|e| CliError::io(path, e))?;
    }
    let parent = parent_dir(path);
    let tmp = tempfile::Builder::new().prefix(".scenesmc-").tempdir_in(&parent).map_err(|e| CliError::io(&parent, e))?;
    fill(tmp.path())?;
    let staged = tmp.keep();
    fs::rename(&staged, path).map_err(|e| {
        let _ = fs::remove_dir_all(&staged);
        CliError::io(path, e)
    })
}

/// CSV text with a header row and one record per row.
pub fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Serialized `rows` under the header derived from `R`'s fields; an empty
/// table still carries the header.
pub fn csv_records<R: Serialize>(header: &[&str], rows: &[R]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.serialize(r).expect("flat records serialize");
    }
    w.into_inner().expect("in-memory flush")
}

/// Shortest round-trip text for a float; negative zero prints as `0`.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x}")
    }
}
