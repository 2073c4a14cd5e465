use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{canonical_digest, BackendError, ChatRequest, ChatResponse};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeMeta {
    /// Transient failures retried before this exchange succeeded.
    pub retries: u32,
}

/// One line of a transcript file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub digest: String,
    pub request: ChatRequest,
    pub response: ChatResponse,
    /// RFC 3339 wall-clock time of the append.
    pub ts: String,
    #[serde(default)]
    pub meta: ExchangeMeta,
}

struct Inner {
    entries: Vec<TranscriptEntry>,
    sink: Option<File>,
}

/// Append-only log of every completed exchange, optionally mirrored to a
/// JSON-lines file.
pub struct Transcript {
    inner: Mutex<Inner>,
    path: Option<PathBuf>,
}

impl Transcript {
    pub fn in_memory() -> Self {
        Self { inner: Mutex::new(Inner { entries: Vec::new(), sink: None }), path: None }
    }

    /// Opens `path` for appending; existing lines are kept.
    pub fn to_file(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| BackendError::io(&path, e))?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| BackendError::io(&path, e))?;
        Ok(Self { inner: Mutex::new(Inner { entries: Vec::new(), sink: Some(file) }), path: Some(path) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn append(
        &self,
        request: &ChatRequest,
        response: &ChatResponse,
        meta: ExchangeMeta,
    ) -> Result<(), BackendError> {
        let entry = TranscriptEntry {
            digest: canonical_digest(request),
            request: request.clone(),
            response: response.clone(),
            ts: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            meta,
        };
        let mut inner = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(sink) = inner.sink.as_mut() {
            let mut line = serde_json::to_vec(&entry).expect("transcript entry serializes");
            line.push(b'\n');
            let path = self.path.as_deref().unwrap_or(Path::new("<transcript>"));
            sink.write_all(&line).map_err(|e| BackendError::io(path, e))?;
            sink.flush().map_err(|e| BackendError::io(path, e))?;
        }
        inner.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> Vec<TranscriptEntry> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner()).entries.clone()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap_or_else(|e| e.into_inner()).entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of recorded exchanges whose request carried `tag`.
    pub fn count_tag(&self, tag: &str) -> usize {
        let inner = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        inner.entries.iter().filter(|e| e.request.tag == tag).count()
    }
}

impl std::fmt::Debug for Transcript {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transcript").field("path", &self.path).field("len", &self.len()).finish()
    }
}

/// Reads every entry of a JSON-lines transcript file.
pub fn read_transcript(path: impl AsRef<Path>) -> Result<Vec<TranscriptEntry>, BackendError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| BackendError::io(path, e))?;
    let mut entries = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| BackendError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|e| BackendError::TranscriptFormat {
            path: path.to_path_buf(),
            line: n + 1,
            detail: e.to_string(),
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Recorded responses keyed by canonical request digest.
#[derive(Debug, Clone, Default)]
pub struct ReplayStore {
    responses: HashMap<String, ChatResponse>,
}

impl ReplayStore {
    /// Builds a store from transcript entries. When a digest repeats, the
    /// first recorded response is kept.
    pub fn from_entries(entries: impl IntoIterator<Item = TranscriptEntry>) -> Self {
        let mut responses = HashMap::new();
        for e in entries {
            responses.entry(e.digest).or_insert(e.response);
        }
        Self { responses }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        Ok(Self::from_entries(read_transcript(path)?))
    }

    pub fn insert(&mut self, request: &ChatRequest, response: ChatResponse) {
        self.responses.insert(canonical_digest(request), response);
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

/// Looks up the recorded response for `request`.
pub fn scripted_complete(request: &ChatRequest, store: &ReplayStore) -> Result<ChatResponse, BackendError> {
    let digest = canonical_digest(request);
    store
        .responses
        .get(&digest)
        .cloned()
        .ok_or_else(|| BackendError::ReplayMiss { digest, tag: request.tag.clone() })
}
