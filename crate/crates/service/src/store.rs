//! Session persistence: one JSON snapshot per session plus an append-only
//! event log that can rebuild it.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use texture_space::session::{LiveSession, SessionEvent};
use texture_space::synthesis::mix_seed;

pub type SessionHandle = Arc<tokio::sync::Mutex<LiveSession>>;

#[derive(Debug)]
pub enum StoreError {
    Io { path: PathBuf, source: io::Error },
    Corrupt { path: PathBuf, reason: String },
}

impl std::fmt::Display for StoreError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StoreError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            StoreError::Corrupt { path, reason } => write!(f, "{}: {reason}", path.display()),
        }
    }
}

impl std::error::Error for StoreError {}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// Live sessions, optionally backed by a directory.
pub struct SessionStore {
    dir: Option<PathBuf>,
    seed: u64,
    counter: AtomicU64,
    sessions: Mutex<HashMap<String, SessionHandle>>,
}

impl SessionStore {
    pub fn in_memory(seed: u64) -> Self {
        Self { dir: None, seed, counter: AtomicU64::new(0), sessions: Mutex::new(HashMap::new()) }
    }

    /// Opens `dir`, creating it if needed, and replays every event log in it.
    pub fn open(dir: impl Into<PathBuf>, seed: u64) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let mut sessions = HashMap::new();
        let entries = fs::read_dir(&dir).map_err(io_err(&dir))?;
        for entry in entries {
            let path = entry.map_err(io_err(&dir))?.path();
            if path.extension().is_some_and(|e| e == "jsonl") {
                let session = replay_file(&path)?;
                sessions.insert(session.session_id.clone(), Arc::new(tokio::sync::Mutex::new(session)));
            }
        }
        let counter = AtomicU64::new(sessions.len() as u64);
        Ok(Self { dir: Some(dir), seed, counter, sessions: Mutex::new(sessions) })
    }

    /// A fresh opaque session id and a display seed for it.
    pub fn next_identity(&self) -> (String, u64) {
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let token = mix_seed(self.seed, n);
        let sessions = self.sessions.lock().expect("session map");
        let mut bump = 0;
        let mut id = format!("{token:016x}");
        while sessions.contains_key(&id) {
            bump += 1;
            id = format!("{:016x}", mix_seed(token, bump));
        }
        (id, mix_seed(token, u64::MAX))
    }

    pub fn get(&self, id: &str) -> Option<SessionHandle> {
        self.sessions.lock().expect("session map").get(id).cloned()
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.lock().expect("session map").keys().cloned().collect();
        ids.sort();
        ids
    }

    /// Registers a new session, persisting its creation event.
    pub fn insert(&self, session: LiveSession, created: &SessionEvent) -> Result<SessionHandle, StoreError> {
        self.persist(&session, created)?;
        let handle = Arc::new(tokio::sync::Mutex::new(session.clone()));
        self.sessions.lock().expect("session map").insert(session.session_id, handle.clone());
        Ok(handle)
    }

    fn log_path(&self, id: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{id}.events.jsonl")))
    }

    pub fn snapshot_path(&self, id: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{id}.json")))
    }

    /// Appends `event` to the session's log and rewrites its snapshot.
    /// Callers hold the session lock, so writes for one session never interleave.
    pub fn persist(&self, session: &LiveSession, event: &SessionEvent) -> Result<(), StoreError> {
        let (Some(log), Some(snapshot)) = (self.log_path(&session.session_id), self.snapshot_path(&session.session_id))
        else {
            return Ok(());
        };
        let mut line = serde_json::to_string(event).expect("events serialize");
        line.push('\n');
        let mut f = OpenOptions::new().create(true).append(true).open(&log).map_err(io_err(&log))?;
        f.write_all(line.as_bytes()).map_err(io_err(&log))?;
        f.sync_data().map_err(io_err(&log))?;

        let tmp = snapshot.with_extension("json.tmp");
        let body = serde_json::to_string_pretty(session).expect("sessions serialize");
        fs::write(&tmp, body).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &snapshot).map_err(io_err(&snapshot))?;
        Ok(())
    }
}

/// Rebuilds a session from an event log file.
pub fn replay_file(path: &Path) -> Result<LiveSession, StoreError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    let mut events = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let event: SessionEvent = serde_json::from_str(&line)
            .map_err(|e| StoreError::Corrupt { path: path.to_path_buf(), reason: format!("line {}: {e}", n + 1) })?;
        events.push(event);
    }
    LiveSession::replay(&events).map_err(|e| StoreError::Corrupt { path: path.to_path_buf(), reason: e.to_string() })
}
