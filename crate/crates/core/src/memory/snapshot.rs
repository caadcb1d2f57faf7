//! Versioned JSON persistence for [`MemoryState`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MemoryState;
use crate::error::{Error, Result};

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SnapshotFile {
    version: u32,
    state: MemoryState,
}

pub fn snapshot(state: &MemoryState, path: &Path) -> Result<()> {
    let file = SnapshotFile {
        version: SNAPSHOT_VERSION,
        state: state.clone(),
    };
    let json = serde_json::to_string_pretty(&file).map_err(|e| Error::Snapshot(e.to_string()))?;
    std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Restore a snapshot; fails on version mismatch or corrupt content and
/// never returns a partial state.
pub fn restore(path: &Path) -> Result<MemoryState> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let file: SnapshotFile =
        serde_json::from_str(&raw).map_err(|e| Error::Snapshot(format!("corrupt snapshot: {e}")))?;
    if file.version != SNAPSHOT_VERSION {
        return Err(Error::Snapshot(format!(
            "version mismatch: snapshot is v{}, supported is v{SNAPSHOT_VERSION}",
            file.version
        )));
    }
    Ok(file.state)
}
