//! Forum activity model: validated log ingestion, the append-only record
//! store and thread resolution.

mod record;
mod thread;

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use record::{ActionRecord, ActionType, ArtifactKind};
pub use thread::{ChainEntry, PostSummary, ThreadContext};

use record::RawRecord;

#[derive(Debug, Error)]
pub enum ForumError {
    #[error("unreadable source: {0}")]
    Unreadable(#[from] std::io::Error),
    #[error("unknown artifact: {0}")]
    NotFound(String),
    #[error("thread integrity violation: missing ancestor {missing} of {target}")]
    Integrity { target: String, missing: String },
    #[error("record rejected: {0}")]
    Rejected(String),
}

/// Outcome of one ingestion batch.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub duplicates_dropped: usize,
    pub rejected: Vec<Rejection>,
}

impl IngestReport {
    pub fn input_count(&self) -> usize {
        self.accepted + self.duplicates_dropped + self.rejected.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub line_number: usize,
    pub reason: String,
}

/// Append-only store of accepted records, iterated in arrival order.
#[derive(Debug, Clone, Default)]
pub struct ForumStore {
    records: Vec<ActionRecord>,
    by_id: HashMap<String, usize>,
    artifacts: HashMap<String, (ArtifactKind, usize)>,
}

impl ForumStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a store from records already known to be valid and in order.
    pub fn from_records(records: impl IntoIterator<Item = ActionRecord>) -> Result<Self, ForumError> {
        let mut store = Self::new();
        for record in records {
            store.append(record)?;
        }
        Ok(store)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[ActionRecord] {
        &self.records
    }

    pub fn get(&self, record_id: &str) -> Option<&ActionRecord> {
        self.by_id.get(record_id).map(|&i| &self.records[i])
    }

    pub fn contains(&self, record_id: &str) -> bool {
        self.by_id.contains_key(record_id)
    }

    /// The record that created a post, comment or reply.
    pub fn artifact(&self, id: &str) -> Option<(ArtifactKind, &ActionRecord)> {
        self.artifacts.get(id).map(|&(kind, i)| (kind, &self.records[i]))
    }

    /// Author of a created artifact.
    pub fn artifact_author(&self, id: &str) -> Option<&str> {
        self.artifact(id).map(|(_, r)| r.actor_id.as_str())
    }

    /// Whom a comment or reply responds to: the post author for comments,
    /// the parent reply's author (or else the comment author) for replies.
    pub fn addressee<'a>(&'a self, record: &'a ActionRecord) -> Option<&'a str> {
        match record.action_type {
            ActionType::Commented => Some(record.post_author_id.as_str()),
            ActionType::Replied => match &record.parent_reply_id {
                Some(parent) => self.artifact_author(parent),
                None => record.comment_author_id.as_deref(),
            },
            _ => None,
        }
    }

    /// Reads a line-delimited log and appends every valid, novel record.
    ///
    /// The whole source is read before anything is appended, so an I/O
    /// failure leaves the store untouched.
    pub fn ingest_log<R: BufRead>(&mut self, source: R) -> Result<(IngestReport, Vec<ActionRecord>), ForumError> {
        let lines = source.lines().collect::<Result<Vec<_>, _>>()?;
        Ok(self.ingest_lines(lines.iter().map(String::as_str)))
    }

    /// Validates and appends lines; returns the report plus the accepted
    /// records in arrival order.
    pub fn ingest_lines<'a>(&mut self, lines: impl IntoIterator<Item = &'a str>) -> (IngestReport, Vec<ActionRecord>) {
        let mut report = IngestReport::default();
        let mut accepted = Vec::new();
        for (idx, line) in lines.into_iter().enumerate() {
            let line_number = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawRecord = match serde_json::from_str(line) {
                Ok(raw) => raw,
                Err(e) => {
                    report.rejected.push(Rejection { line_number, reason: format!("malformed record: {e}") });
                    continue;
                }
            };
            if let Some(id) = raw.record_id.as_deref() {
                if self.by_id.contains_key(id) {
                    report.duplicates_dropped += 1;
                    continue;
                }
            }
            let outcome = raw.into_record().and_then(|record| {
                self.append(record.clone()).map_err(|e| match e {
                    ForumError::Rejected(reason) => reason,
                    other => other.to_string(),
                })?;
                Ok(record)
            });
            match outcome {
                Ok(record) => {
                    report.accepted += 1;
                    accepted.push(record);
                }
                Err(reason) => report.rejected.push(Rejection { line_number, reason }),
            }
        }
        (report, accepted)
    }

    /// Appends one record after the store-level checks: unique record id,
    /// unique artifact id, likes must point at a known artifact.
    pub fn append(&mut self, record: ActionRecord) -> Result<(), ForumError> {
        record.check_shape().map_err(ForumError::Rejected)?;
        if self.by_id.contains_key(&record.record_id) {
            return Err(ForumError::Rejected(format!("duplicate record_id: {}", record.record_id)));
        }
        match record.action_type {
            ActionType::LikedComment => {
                let target = record.comment_id.as_deref().unwrap_or_default();
                if !matches!(self.artifacts.get(target), Some((ArtifactKind::Comment, _))) {
                    return Err(ForumError::Rejected(format!("dangling like target: {target}")));
                }
            }
            ActionType::LikedReply => {
                let target = record.reply_id.as_deref().unwrap_or_default();
                if !matches!(self.artifacts.get(target), Some((ArtifactKind::Reply, _))) {
                    return Err(ForumError::Rejected(format!("dangling like target: {target}")));
                }
            }
            _ => {}
        }
        let index = self.records.len();
        if let Some((kind, id)) = record.created_artifact() {
            if self.artifacts.contains_key(id) {
                return Err(ForumError::Rejected(format!("artifact already exists: {id}")));
            }
            self.artifacts.insert(id.to_string(), (kind, index));
        }
        self.by_id.insert(record.record_id.clone(), index);
        self.records.push(record);
        Ok(())
    }

    /// Root post of a post, comment or reply.
    pub fn root_post_of(&self, artifact_id: &str) -> Option<&str> {
        self.artifact(artifact_id).map(|(_, r)| r.post_id.as_str())
    }

    /// Distinct root posts touched by any record, in first-seen order.
    pub fn thread_ids(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.records.iter().filter(|r| seen.insert(r.post_id.as_str())).map(|r| r.post_id.as_str()).collect()
    }
}
