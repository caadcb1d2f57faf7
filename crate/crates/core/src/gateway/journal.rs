//! Run journal: an append-only JSONL record of every completion exchange.
//! A recorded journal can be replayed as a backend to reproduce a run
//! without the original model.

use std::collections::VecDeque;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub tag: String,
    pub prompt: String,
    pub response: String,
    pub started_ms: u64,
    pub finished_ms: u64,
}

/// Serializes appends behind a mutex; one journal per run.
pub struct Journal {
    path: PathBuf,
    writer: Mutex<BufWriter<File>>,
}

impl Journal {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(Journal {
            path: path.to_path_buf(),
            writer: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn append_to(path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(Journal {
            path: path.to_path_buf(),
            writer: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, entry: &JournalEntry) -> Result<()> {
        let line = serde_json::to_string(entry).map_err(|e| Error::Journal(e.to_string()))?;
        let mut writer = self.writer.lock().expect("journal writer poisoned");
        writeln!(writer, "{line}")
            .and_then(|_| writer.flush())
            .map_err(|e| Error::io(self.path.display().to_string(), e))
    }
}

pub fn read_journal(path: &Path) -> Result<Vec<JournalEntry>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut entries = Vec::new();
    for (lineno, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: JournalEntry = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
            path: path.display().to_string(),
            line: lineno + 1,
            detail: e.to_string(),
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Replays a journal strictly in order, verifying that each incoming prompt
/// matches the recorded one. Note entries (empty prompt) are skipped.
pub struct JournalBackend {
    queue: Mutex<VecDeque<JournalEntry>>,
}

impl JournalBackend {
    pub fn from_file(path: &Path) -> Result<Self> {
        let entries = read_journal(path)?
            .into_iter()
            .filter(|e| !e.prompt.is_empty())
            .collect();
        Ok(JournalBackend {
            queue: Mutex::new(entries),
        })
    }

    pub fn complete(&self, prompt: &str) -> Result<String> {
        let mut queue = self.queue.lock().expect("journal queue poisoned");
        match queue.pop_front() {
            None => Err(Error::Journal("journal exhausted: no entries left to replay".into())),
            Some(entry) => {
                if entry.prompt != prompt {
                    return Err(Error::Journal(format!(
                        "replay prompt mismatch: recorded tag '{}' expected a different prompt",
                        entry.tag
                    )));
                }
                Ok(entry.response)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn journal_round_trips_entries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("journal.jsonl");
        let journal = Journal::create(&path).unwrap();
        let entry = JournalEntry {
            tag: "t".into(),
            prompt: "p".into(),
            response: "r".into(),
            started_ms: 1,
            finished_ms: 2,
        };
        journal.append(&entry).unwrap();
        let read = read_journal(&path).unwrap();
        assert_eq!(read, vec![entry]);
    }

    #[test]
    fn replay_returns_recorded_responses_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("journal.jsonl");
        let journal = Journal::create(&path).unwrap();
        for i in 0..3 {
            journal
                .append(&JournalEntry {
                    tag: "t".into(),
                    prompt: format!("p{i}"),
                    response: format!("r{i}"),
                    started_ms: 0,
                    finished_ms: 0,
                })
                .unwrap();
        }
        let backend = JournalBackend::from_file(&path).unwrap();
        assert_eq!(backend.complete("p0").unwrap(), "r0");
        assert_eq!(backend.complete("p1").unwrap(), "r1");
        assert!(backend.complete("wrong prompt").is_err());
    }
}
