// SPDX-License-Identifier: Apache-2.0

//! Controller change log: which object was added, deleted or modified when.
//! Timestamps are abstract monotonic integers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::object::ObjectId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChangeAction {
    Add,
    Delete,
    Modify,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeLogEntry {
    pub ts: u64,
    pub object: ObjectId,
    pub action: ChangeAction,
}

impl ChangeLogEntry {
    pub fn new(ts: u64, object: ObjectId, action: ChangeAction) -> Self {
        ChangeLogEntry { ts, object, action }
    }
}

/// A time-ordered change log. Timestamps never decrease.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct ChangeLog {
    entries: Vec<ChangeLogEntry>,
}

impl ChangeLog {
    pub fn new(entries: Vec<ChangeLogEntry>) -> Result<Self> {
        if let Some(w) = entries.windows(2).find(|w| w[1].ts < w[0].ts) {
            return Err(Error::Input(format!(
                "change log timestamps decrease: {} after {} (object {})",
                w[1].ts, w[0].ts, w[1].object
            )));
        }
        Ok(ChangeLog { entries })
    }

    /// Sorts by timestamp (stable) before building the log.
    pub fn from_unordered(mut entries: Vec<ChangeLogEntry>) -> Self {
        entries.sort_by_key(|e| e.ts);
        ChangeLog { entries }
    }

    pub fn entries(&self) -> &[ChangeLogEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn latest_ts(&self) -> Option<u64> {
        self.entries.last().map(|e| e.ts)
    }

    pub fn for_object<'a>(&'a self, object: &'a ObjectId) -> impl Iterator<Item = &'a ChangeLogEntry> + 'a {
        self.entries.iter().filter(move |e| &e.object == object)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let entries = io::read_jsonl(path)?;
        ChangeLog::new(entries).map_err(|e| match e {
            Error::Input(msg) => Error::Input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_jsonl(path, &self.entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_decreasing_timestamps() {
        let e = |ts| ChangeLogEntry::new(ts, ObjectId::filter("f"), ChangeAction::Add);
        assert!(ChangeLog::new(vec![e(1), e(1), e(4)]).is_ok());
        assert!(ChangeLog::new(vec![e(3), e(2)]).is_err());
        assert_eq!(ChangeLog::from_unordered(vec![e(3), e(2)]).latest_ts(), Some(3));
    }

    #[test]
    fn jsonl_schema() {
        let line = r#"{"ts":7,"object":{"kind":"Filter","name":"port700"},"action":"Modify"}"#;
        let e: ChangeLogEntry = serde_json::from_str(line).unwrap();
        assert_eq!(e, ChangeLogEntry::new(7, ObjectId::filter("port700"), ChangeAction::Modify));
        assert_eq!(serde_json::to_string(&e).unwrap(), line);
    }
}
