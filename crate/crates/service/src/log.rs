//! The append-only attempt log (`attempts.jsonl`) and the session
//! statistics folded from it.
//!
//! A session runs per learner and exercise from the first time the
//! exercise is opened (or first answered) until a fill-in submission is
//! entirely correct.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LOG_FILE: &str = "attempts.jsonl";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Selection,
    Fillin,
    Ordering,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub correct: bool,
    pub detail: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttemptRecord {
    pub learner_name: String,
    pub exercise_id: String,
    pub task_kind: TaskKind,
    pub attempt_number: u32,
    pub submitted_at: DateTime<Utc>,
    pub payload: serde_json::Value,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum LogEntry {
    #[serde(rename_all = "camelCase")]
    Opened {
        learner_name: String,
        exercise_id: String,
        at: DateTime<Utc>,
    },
    Attempt(AttemptRecord),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionStats {
    pub learner_name: String,
    pub exercise_id: String,
    pub started_at: DateTime<Utc>,
    pub completed_at: Option<DateTime<Utc>>,
    pub selection_attempts: u32,
    pub fillin_attempts: u32,
    /// Seconds from the session start to completion; absent while the
    /// session is still open.
    pub learning_duration_seconds: Option<f64>,
}

#[derive(Clone, Debug)]
struct OpenSession {
    started_at: DateTime<Utc>,
    selection_attempts: u32,
    fillin_attempts: u32,
    unlocked: bool,
}

impl OpenSession {
    fn new(at: DateTime<Utc>) -> Self {
        OpenSession {
            started_at: at,
            selection_attempts: 0,
            fillin_attempts: 0,
            unlocked: false,
        }
    }
}

type Key = (String, String);

/// Everything derivable from the log, updated one entry at a time.
#[derive(Clone, Debug, Default)]
pub struct LogState {
    open: BTreeMap<Key, OpenSession>,
    closed: Vec<SessionStats>,
    attempts: BTreeMap<(String, String, TaskKind), u32>,
}

impl LogState {
    pub fn fold<'a>(entries: impl IntoIterator<Item = &'a LogEntry>) -> Self {
        let mut state = LogState::default();
        for e in entries {
            state.apply(e);
        }
        state
    }

    pub fn apply(&mut self, entry: &LogEntry) {
        match entry {
            LogEntry::Opened {
                learner_name,
                exercise_id,
                at,
            } => {
                self.open
                    .entry((learner_name.clone(), exercise_id.clone()))
                    .or_insert_with(|| OpenSession::new(*at));
            }
            LogEntry::Attempt(a) => {
                let count = self
                    .attempts
                    .entry((a.learner_name.clone(), a.exercise_id.clone(), a.task_kind))
                    .or_insert(0);
                *count = (*count).max(a.attempt_number);
                if a.task_kind == TaskKind::Ordering {
                    return;
                }
                let key = (a.learner_name.clone(), a.exercise_id.clone());
                let session = self
                    .open
                    .entry(key.clone())
                    .or_insert_with(|| OpenSession::new(a.submitted_at));
                match a.task_kind {
                    TaskKind::Selection => {
                        session.selection_attempts += 1;
                        session.unlocked |= a.verdict.correct;
                    }
                    TaskKind::Fillin => session.fillin_attempts += 1,
                    TaskKind::Ordering => unreachable!(),
                }
                if a.task_kind == TaskKind::Fillin && a.verdict.correct {
                    let s = self.open.remove(&key).expect("session was just touched");
                    self.closed.push(SessionStats {
                        learner_name: key.0,
                        exercise_id: key.1,
                        started_at: s.started_at,
                        completed_at: Some(a.submitted_at),
                        selection_attempts: s.selection_attempts,
                        fillin_attempts: s.fillin_attempts,
                        learning_duration_seconds: Some(seconds(a.submitted_at - s.started_at)),
                    });
                }
            }
        }
    }

    /// Attempts recorded so far for one learner, exercise and task.
    pub fn attempt_count(&self, learner: &str, exercise: &str, task: TaskKind) -> u32 {
        self.attempts
            .get(&(learner.to_string(), exercise.to_string(), task))
            .copied()
            .unwrap_or(0)
    }

    pub fn has_open_session(&self, learner: &str, exercise: &str) -> bool {
        self.open
            .contains_key(&(learner.to_string(), exercise.to_string()))
    }

    /// Whether the learner's open session on `exercise` has passed the
    /// selection question.
    pub fn fill_in_unlocked(&self, learner: &str, exercise: &str) -> bool {
        self.open
            .get(&(learner.to_string(), exercise.to_string()))
            .is_some_and(|s| s.unlocked)
    }

    /// Sessions of one learner, completed and open, by start time.
    pub fn session_stats(&self, learner: &str) -> Vec<SessionStats> {
        let mut out: Vec<SessionStats> = self
            .closed
            .iter()
            .filter(|s| s.learner_name == learner)
            .cloned()
            .collect();
        out.extend(
            self.open
                .iter()
                .filter(|((l, _), _)| l == learner)
                .map(|((l, e), s)| SessionStats {
                    learner_name: l.clone(),
                    exercise_id: e.clone(),
                    started_at: s.started_at,
                    completed_at: None,
                    selection_attempts: s.selection_attempts,
                    fillin_attempts: s.fillin_attempts,
                    learning_duration_seconds: None,
                }),
        );
        out.sort_by(|a, b| (a.started_at, &a.exercise_id).cmp(&(b.started_at, &b.exercise_id)));
        out
    }
}

fn seconds(d: Duration) -> f64 {
    (d.num_milliseconds().max(0) as f64) / 1000.0
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
}

pub fn read_log(path: &Path) -> Result<Vec<LogEntry>, LogError> {
    let io = |source| LogError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io(e)),
    };
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|source| LogError::Corrupt {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

/// The log file plus its folded state, behind one lock so that every
/// append and the state it produces stay in step.
pub struct AttemptLog {
    path: Option<PathBuf>,
    inner: Mutex<(Option<File>, LogState)>,
}

impl AttemptLog {
    /// Opens (creating if needed) `<data_dir>/attempts.jsonl` and folds the
    /// entries already in it.
    pub fn open(data_dir: &Path) -> Result<Self, LogError> {
        let path = data_dir.join(LOG_FILE);
        let state = LogState::fold(&read_log(&path)?);
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| LogError::Io {
                path: path.clone(),
                source,
            })?;
        Ok(AttemptLog {
            path: Some(path),
            inner: Mutex::new((Some(file), state)),
        })
    }

    /// A log that keeps nothing on disk.
    pub fn in_memory() -> Self {
        AttemptLog {
            path: None,
            inner: Mutex::new((None, LogState::default())),
        }
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Appends the entry built from the current state, if any, then applies
    /// it.
    pub fn append_with<T>(
        &self,
        build: impl FnOnce(&LogState) -> (Option<LogEntry>, T),
    ) -> Result<T, LogError> {
        let mut guard = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        let (file, state) = &mut *guard;
        let (entry, out) = build(state);
        let Some(entry) = entry else {
            return Ok(out);
        };
        if let Some(file) = file {
            let mut line = serde_json::to_string(&entry).expect("log entries serialize");
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|source| LogError::Io {
                    path: self.path.clone().unwrap_or_default(),
                    source,
                })?;
        }
        state.apply(&entry);
        Ok(out)
    }

    pub fn read<T>(&self, f: impl FnOnce(&LogState) -> T) -> T {
        let guard = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        f(&guard.1)
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// A clock that only moves when told to.
pub struct ManualClock(Mutex<DateTime<Utc>>);

impl ManualClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        ManualClock(Mutex::new(start))
    }

    pub fn advance(&self, by: Duration) {
        let mut t = self.0.lock().unwrap_or_else(|e| e.into_inner());
        *t += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.lock().unwrap_or_else(|e| e.into_inner())
    }
}
