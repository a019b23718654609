//! On-disk formats: `snapshot.json`, `corpus.json` and `index.json`.
//!
//! Every file is UTF-8 JSON with a top-level `"schema"` version field and
//! keys sorted lexicographically, so reruns over identical inputs produce
//! byte-identical files and fixtures diff cleanly.

use std::fs;
use std::path::{Path, PathBuf};

use ietf_reporter_core::corpus::Corpus;
use ietf_reporter_core::index::RetrievalIndex;
use ietf_reporter_core::records::{RawAttendanceRow, RawSession};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Version written into every store file.
pub const SCHEMA_VERSION: u64 = 1;

pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const CORPUS_FILE: &str = "corpus.json";
pub const INDEX_FILE: &str = "index.json";

/// Raw ingest output, persisted between `sync` and `build`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub meeting_number: u32,
    pub sessions: Vec<RawSession>,
    pub attendance: Vec<RawAttendanceRow>,
    pub skipped_rows: u32,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("io failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema failure in {path}: {message}")]
    Schema { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn schema_err(path: &Path, message: impl Into<String>) -> StoreError {
    StoreError::Schema {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Serializes with sorted keys and a schema marker, then writes the file.
fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<(), StoreError> {
    // Round-tripping through Value sorts every object's keys.
    let mut tree = serde_json::to_value(value)
        .map_err(|e| schema_err(path, format!("serialization failed: {e}")))?;
    tree.as_object_mut()
        .expect("store values serialize to objects")
        .insert("schema".into(), serde_json::json!(SCHEMA_VERSION));
    let mut body = serde_json::to_string_pretty(&tree)
        .map_err(|e| schema_err(path, format!("serialization failed: {e}")))?;
    body.push('\n');
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(path))?;
    }
    fs::write(path, body).map_err(io_err(path))
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let text = String::from_utf8_lossy(&bytes);
    let mut tree: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| schema_err(path, format!("malformed JSON: {e}")))?;
    let object = tree
        .as_object_mut()
        .ok_or_else(|| schema_err(path, "top level is not an object"))?;
    match object.remove("schema") {
        Some(serde_json::Value::Number(v)) if v.as_u64() == Some(SCHEMA_VERSION) => {}
        Some(other) => {
            return Err(schema_err(
                path,
                format!("unsupported schema version {other}"),
            ))
        }
        None => return Err(schema_err(path, "missing schema field")),
    }
    serde_json::from_value(tree).map_err(|e| schema_err(path, format!("missing or bad keys: {e}")))
}

pub fn save_snapshot(snapshot: &Snapshot, dir: &Path) -> Result<PathBuf, StoreError> {
    let path = dir.join(SNAPSHOT_FILE);
    save_json(snapshot, &path)?;
    Ok(path)
}

pub fn load_snapshot(dir: &Path) -> Result<Snapshot, StoreError> {
    load_json(&dir.join(SNAPSHOT_FILE))
}

pub fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<PathBuf, StoreError> {
    let path = dir.join(CORPUS_FILE);
    save_json(corpus, &path)?;
    Ok(path)
}

pub fn load_corpus(dir: &Path) -> Result<Corpus, StoreError> {
    load_json(&dir.join(CORPUS_FILE))
}

pub fn save_index(index: &RetrievalIndex, dir: &Path) -> Result<PathBuf, StoreError> {
    let path = dir.join(INDEX_FILE);
    save_json(index, &path)?;
    Ok(path)
}

pub fn load_index(dir: &Path) -> Result<RetrievalIndex, StoreError> {
    load_json(&dir.join(INDEX_FILE))
}
