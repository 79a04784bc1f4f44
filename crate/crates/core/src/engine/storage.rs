use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EngineError, Event, Snapshot};

const EVENTS_FILE: &str = "events.ndjson";
const SNAPSHOT_FILE: &str = "snapshot.json";

/// Append-only event log plus a periodic full snapshot. The snapshot records
/// how many log lines it already covers.
pub(super) struct Storage {
    dir: PathBuf,
    log: File,
    events: usize,
    since_snapshot: usize,
    snapshot_every: usize,
}

#[derive(Serialize, Deserialize)]
struct SnapshotFile {
    events_applied: usize,
    state: Snapshot,
}

fn io_err(path: &Path, e: std::io::Error) -> EngineError {
    EngineError::Storage(format!("{}: {e}", path.display()))
}

impl Storage {
    /// Opens (creating if needed) a data directory and returns the last
    /// snapshot together with the events logged after it.
    pub(super) fn open(dir: &Path, snapshot_every: usize) -> Result<(Self, Option<Snapshot>, Vec<Event>), EngineError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let snap_path = dir.join(SNAPSHOT_FILE);
        let (covered, snapshot) = if snap_path.exists() {
            let text = fs::read_to_string(&snap_path).map_err(|e| io_err(&snap_path, e))?;
            let file: SnapshotFile =
                serde_json::from_str(&text).map_err(|e| EngineError::Corrupt(format!("snapshot: {e}")))?;
            (file.events_applied, Some(file.state))
        } else {
            (0, None)
        };

        let log_path = dir.join(EVENTS_FILE);
        let mut events = Vec::new();
        let mut total = 0;
        let mut good_len = 0u64;
        if log_path.exists() {
            let reader = BufReader::new(File::open(&log_path).map_err(|e| io_err(&log_path, e))?);
            let mut lines = reader.split(b'\n').peekable();
            let mut offset = 0u64;
            while let Some(line) = lines.next() {
                let line = line.map_err(|e| io_err(&log_path, e))?;
                let is_last = lines.peek().is_none();
                offset += line.len() as u64 + 1;
                if line.iter().all(u8::is_ascii_whitespace) {
                    good_len = offset;
                    continue;
                }
                match serde_json::from_slice::<Event>(&line) {
                    Ok(ev) => {
                        if total >= covered {
                            events.push(ev);
                        }
                        total += 1;
                        good_len = offset;
                    }
                    // A torn final write from a crash; drop it.
                    Err(e) if is_last => {
                        tracing::warn!(error = %e, "discarding incomplete final event");
                    }
                    Err(e) => return Err(EngineError::Corrupt(format!("event {}: {e}", total + 1))),
                }
            }
        }
        if total < covered {
            return Err(EngineError::Corrupt(format!("snapshot covers {covered} events but log has {total}")));
        }
        let log = OpenOptions::new().create(true).append(true).open(&log_path).map_err(|e| io_err(&log_path, e))?;
        if log.metadata().map_err(|e| io_err(&log_path, e))?.len() > good_len {
            log.set_len(good_len).map_err(|e| io_err(&log_path, e))?;
        }
        let storage =
            Storage { dir: dir.to_path_buf(), log, events: total, since_snapshot: total - covered, snapshot_every };
        Ok((storage, snapshot, events))
    }

    pub(super) fn append(&mut self, event: &Event) -> Result<(), EngineError> {
        let mut line = serde_json::to_vec(event).map_err(|e| EngineError::Storage(e.to_string()))?;
        line.push(b'\n');
        let path = self.dir.join(EVENTS_FILE);
        self.log.write_all(&line).map_err(|e| io_err(&path, e))?;
        self.log.flush().map_err(|e| io_err(&path, e))?;
        self.events += 1;
        self.since_snapshot += 1;
        Ok(())
    }

    pub(super) fn snapshot_due(&self) -> bool {
        self.since_snapshot >= self.snapshot_every
    }

    pub(super) fn write_snapshot(&mut self, state: Snapshot) -> Result<(), EngineError> {
        let file = SnapshotFile { events_applied: self.events, state };
        let body = serde_json::to_vec(&file).map_err(|e| EngineError::Storage(e.to_string()))?;
        let tmp = self.dir.join("snapshot.json.tmp");
        let dest = self.dir.join(SNAPSHOT_FILE);
        fs::write(&tmp, body).map_err(|e| io_err(&tmp, e))?;
        fs::rename(&tmp, &dest).map_err(|e| io_err(&dest, e))?;
        self.since_snapshot = 0;
        Ok(())
    }
}
