use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobStatus {
    pub kind: String,
    #[serde(with = "crate::timefmt")]
    pub started_at: DateTime<Utc>,
}

/// Admits one long-running job (targeting run or analysis) at a time.
#[derive(Debug, Default)]
pub struct JobSlot {
    current: Mutex<Option<JobStatus>>,
}

/// Releases the slot when dropped.
#[derive(Debug)]
pub struct JobTicket<'a> {
    slot: &'a JobSlot,
}

impl JobSlot {
    pub fn new() -> Self {
        Self::default()
    }

    /// Claims the slot, or reports the job already holding it.
    pub fn try_start(&self, kind: &str, now: DateTime<Utc>) -> Result<JobTicket<'_>, JobStatus> {
        let mut cur = self.current.lock().expect("job slot poisoned");
        if let Some(running) = cur.as_ref() {
            return Err(running.clone());
        }
        *cur = Some(JobStatus { kind: kind.to_string(), started_at: now });
        Ok(JobTicket { slot: self })
    }

    pub fn current(&self) -> Option<JobStatus> {
        self.current.lock().expect("job slot poisoned").clone()
    }
}

impl Drop for JobTicket<'_> {
    fn drop(&mut self) {
        *self.slot.current.lock().expect("job slot poisoned") = None;
    }
}
