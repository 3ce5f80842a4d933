use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use idiom_graph_core::engine::{parse_event_log, Engine, EventRecord, Services, Snapshot};
use idiom_graph_core::workflow::WorkflowConfig;

use crate::error::{Result, ServiceError};

pub const EVENTS_FILE: &str = "events.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

/// State directory holding the append-only event log and a periodic
/// snapshot. All changes go through [`Store::mutate`], which persists the new
/// events before the in-memory engine is replaced.
#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    engine: Arc<Engine>,
    history: Arc<Vec<EventRecord>>,
    snapshot_sequence: u64,
    snapshot_every: u64,
}

impl Store {
    pub fn open(dir: &Path, services: Services, snapshot_every: u64) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| ServiceError::io(dir, e))?;
        let events_path = dir.join(EVENTS_FILE);
        let history = match fs::read_to_string(&events_path) {
            Ok(text) => parse_event_log(&text)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(ServiceError::io(&events_path, e)),
        };
        let last = history.last().map_or(0, |r| r.sequence);
        // The snapshot is a cache: anything unusable falls back to a full replay.
        let snapshot = fs::read_to_string(dir.join(SNAPSHOT_FILE))
            .ok()
            .and_then(|t| serde_json::from_str::<Snapshot>(&t).ok())
            .filter(|s| s.sequence <= last);
        let (engine, snapshot_sequence) = match snapshot {
            Some(s) => {
                let seq = s.sequence;
                match Engine::from_snapshot(services.clone(), s, &history) {
                    Ok(engine) => (engine, seq),
                    Err(_) => (Engine::replay(services, &history)?, 0),
                }
            }
            None => (Engine::replay(services, &history)?, 0),
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            engine: Arc::new(engine),
            history: Arc::new(history),
            snapshot_sequence,
            snapshot_every: snapshot_every.max(1),
        })
    }

    pub fn engine(&self) -> Arc<Engine> {
        Arc::clone(&self.engine)
    }

    /// Every event since the state was created, including those folded into
    /// the snapshot.
    pub fn history(&self) -> Arc<Vec<EventRecord>> {
        Arc::clone(&self.history)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Applies the configured workflow. A fresh state takes it as is; an
    /// existing one keeps its current tau, which the feedback loop owns.
    pub fn configure(&mut self, config: &WorkflowConfig) -> Result<()> {
        let mut wanted = config.clone();
        if self.engine.sequence() > 0 {
            wanted.tau = self.engine.config().tau;
        }
        if &wanted != self.engine.config() {
            self.mutate(|e| e.set_config(wanted))?;
        }
        Ok(())
    }

    /// Runs `f` on a copy of the engine. Events it produced are appended and
    /// synced to disk before the copy becomes current; on any failure both the
    /// file and the in-memory state stay as they were.
    pub fn mutate<T>(&mut self, f: impl FnOnce(&mut Engine) -> idiom_graph_core::Result<T>) -> Result<T> {
        let mut draft = (*self.engine).clone();
        let out = f(&mut draft)?;
        let new = draft.events_since(self.engine.sequence()).to_vec();
        if !new.is_empty() {
            self.append(&new)?;
            Arc::make_mut(&mut self.history).extend(new);
            // The events are durable at this point, so a failed snapshot must
            // not fail the request; the next one will try again.
            if draft.sequence() - self.snapshot_sequence >= self.snapshot_every {
                if let Err(e) = self.write_snapshot(&draft) {
                    eprintln!("warning: snapshot not written: {e}");
                }
            }
        }
        self.engine = Arc::new(draft);
        Ok(out)
    }

    fn append(&self, records: &[EventRecord]) -> Result<()> {
        let path = self.dir.join(EVENTS_FILE);
        let mut file =
            OpenOptions::new().create(true).append(true).open(&path).map_err(|e| ServiceError::io(&path, e))?;
        let before = file.metadata().map_err(|e| ServiceError::io(&path, e))?.len();
        let mut buf = String::new();
        for r in records {
            buf.push_str(&r.to_json_line());
            buf.push('\n');
        }
        let written = file.write_all(buf.as_bytes()).and_then(|()| file.sync_data());
        if let Err(e) = written {
            // Best effort: drop a partially written tail.
            let _ = file.set_len(before);
            return Err(ServiceError::io(&path, e));
        }
        Ok(())
    }

    fn write_snapshot(&mut self, engine: &Engine) -> Result<()> {
        let path = self.dir.join(SNAPSHOT_FILE);
        let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        let json = serde_json::to_vec(&engine.snapshot()).expect("snapshots serialize");
        let write = || -> std::io::Result<()> {
            let mut f = File::create(&tmp)?;
            f.write_all(&json)?;
            f.sync_all()?;
            fs::rename(&tmp, &path)
        };
        write().map_err(|e| ServiceError::io(&path, e))?;
        self.snapshot_sequence = engine.sequence();
        Ok(())
    }
}
