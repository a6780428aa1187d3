//! Append-only JSONL run store.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Condition, RunnerError};
use crate::gateway::ParsedRatings;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RunKey {
    #[serde(flatten)]
    pub condition: Condition,
    pub respondent_id: String,
    pub repeat_index: u32,
}

impl std::fmt::Display for RunKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}#{}", self.condition, self.respondent_id, self.repeat_index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    ParseFailed,
    TransportFailed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::ParseFailed => "parse_failed",
            RunStatus::TransportFailed => "transport_failed",
        }
    }
}

/// One persisted simulation outcome. Every status is terminal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub key: RunKey,
    pub status: RunStatus,
    pub seed: u64,
    pub prompt_digest: String,
    pub token_count: usize,
    pub encoding: String,
    pub tokenizer_backend: String,
    pub raw_text: String,
    /// Absent when no reply was obtained.
    pub parsed: Option<ParsedRatings>,
    pub reasks: u32,
    pub provider_calls: u32,
    pub prompt_tokens: u64,
    pub output_tokens: u64,
    pub latency_ms: u64,
    pub provider_metadata: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    pub fn ratings(&self) -> Option<&[i32]> {
        match (&self.status, &self.parsed) {
            (RunStatus::Ok, Some(p)) => p.ratings(),
            _ => None,
        }
    }
}

/// Records in file order plus an index of terminal keys.
#[derive(Debug)]
pub struct RunStore {
    path: Option<PathBuf>,
    writer: Option<BufWriter<File>>,
    records: Vec<RunRecord>,
    index: HashMap<RunKey, usize>,
}

impl RunStore {
    /// A store that lives only in memory.
    pub fn in_memory() -> Self {
        Self { path: None, writer: None, records: Vec::new(), index: HashMap::new() }
    }

    /// `<output_dir>/runs/<manifest_id>.jsonl`.
    pub fn path_for(output_dir: &Path, manifest_id: &str) -> PathBuf {
        output_dir.join("runs").join(format!("{manifest_id}.jsonl"))
    }

    /// Opens or creates the store. A trailing line cut short by a crash is dropped
    /// from the file; a corrupt line anywhere else is an error.
    pub fn open(path: &Path) -> Result<Self, RunnerError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| RunnerError::io(dir, e))?;
        }
        let text = read_bytes(path)?;
        let (mut store, good_len) = Self::parse(&text, path)?;
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| RunnerError::io(path, e))?;
        if good_len < text.len() {
            file.set_len(good_len as u64).map_err(|e| RunnerError::io(path, e))?;
        }
        store.path = Some(path.to_path_buf());
        store.writer = Some(BufWriter::new(file));
        Ok(store)
    }

    /// Loads the store without modifying or creating the file. A missing file
    /// reads as empty; a partial trailing line is ignored.
    pub fn read(path: &Path) -> Result<Self, RunnerError> {
        let text = read_bytes(path)?;
        let (mut store, _) = Self::parse(&text, path)?;
        store.path = Some(path.to_path_buf());
        Ok(store)
    }

    fn parse(text: &[u8], path: &Path) -> Result<(Self, usize), RunnerError> {
        let mut store = Self::in_memory();
        let mut good_len = 0usize;
        let mut pos = 0usize;
        let mut line_no = 0usize;
        while pos < text.len() {
            line_no += 1;
            let end = text[pos..].iter().position(|&b| b == b'\n').map(|i| pos + i);
            let line = &text[pos..end.unwrap_or(text.len())];
            let parsed = std::str::from_utf8(line).ok().and_then(|s| serde_json::from_str::<RunRecord>(s).ok());
            match (parsed, end) {
                (Some(rec), Some(end)) => {
                    store.insert(rec);
                    pos = end + 1;
                    good_len = pos;
                }
                (_, None) => {
                    log::warn!(
                        "store={} line={line_no} event=partial_record bytes={}",
                        path.display(),
                        line.len()
                    );
                    break;
                }
                (None, Some(end)) if line.iter().all(u8::is_ascii_whitespace) => {
                    pos = end + 1;
                    good_len = pos;
                }
                (None, Some(_)) => {
                    return Err(RunnerError::Store {
                        path: path.display().to_string(),
                        message: format!("line {line_no} is not a valid run record"),
                    })
                }
            }
        }
        Ok((store, good_len))
    }

    fn insert(&mut self, record: RunRecord) -> bool {
        if self.index.contains_key(&record.key) {
            return false;
        }
        self.index.insert(record.key.clone(), self.records.len());
        self.records.push(record);
        true
    }

    /// Appends `record` unless its key is already terminal. Returns whether it was written.
    pub fn append(&mut self, record: RunRecord) -> Result<bool, RunnerError> {
        if self.index.contains_key(&record.key) {
            return Ok(false);
        }
        if let Some(w) = self.writer.as_mut() {
            let path = self.path.as_deref().unwrap_or(Path::new(""));
            let line = serde_json::to_string(&record).map_err(|e| RunnerError::Store {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            w.write_all(line.as_bytes())
                .and_then(|_| w.write_all(b"\n"))
                .and_then(|_| w.flush())
                .map_err(|e| RunnerError::io(path, e))?;
        }
        Ok(self.insert(record))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn is_terminal(&self, key: &RunKey) -> bool {
        self.index.contains_key(key)
    }

    pub fn get(&self, key: &RunKey) -> Option<&RunRecord> {
        self.index.get(key).map(|&i| &self.records[i])
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn for_condition<'a>(&'a self, condition: &'a Condition) -> impl Iterator<Item = &'a RunRecord> + 'a {
        self.records.iter().filter(move |r| &r.key.condition == condition)
    }

    /// Keys of `expected` without a terminal record.
    pub fn missing<'a>(&self, expected: &'a [RunKey]) -> Vec<&'a RunKey> {
        expected.iter().filter(|k| !self.is_terminal(k)).collect()
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, RunnerError> {
    match std::fs::read(path) {
        Ok(bytes) => Ok(bytes),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(RunnerError::io(path, e)),
    }
}
