//! Traces: the globally ordered, thread-tagged event log of one execution,
//! and its bracketed text form (`[thread-1] c++`).

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::program::{ProgramModel, StatementRef};
use crate::replay::Schedule;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Event {
    /// 1-based position in the trace (the trace table's procedure number).
    pub seq: usize,
    pub thread: Arc<str>,
    /// Position of this event in its thread's program order (0-based).
    pub ordinal: usize,
    pub statement: StatementRef,
    /// 0 = directly inside the thread's root method.
    pub depth: usize,
    /// `seq` of the enclosing call event; 0 for the synthetic thread root.
    pub parent_seq: usize,
    pub display: Arc<str>,
    pub source_line: u32,
}

impl Event {
    pub fn key(&self) -> EventKey {
        EventKey {
            thread: self.thread.to_string(),
            ordinal: self.ordinal,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Trace {
    pub program: String,
    /// Thread names in column order (main first, then spawn order).
    pub threads: Vec<String>,
    /// Root method of each thread, parallel to `threads`.
    pub root_methods: Vec<String>,
    pub events: Vec<Event>,
    pub schedule: Schedule,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Event at a 1-based row.
    pub fn event(&self, seq: usize) -> Option<&Event> {
        seq.checked_sub(1).and_then(|i| self.events.get(i))
    }

    pub fn keys(&self) -> Vec<EventKey> {
        self.events.iter().map(Event::key).collect()
    }
}

/// Identity of one event independent of the interleaving: which thread ran
/// it and where it sits in that thread's program order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventKey {
    pub thread: String,
    pub ordinal: usize,
}

/// A trace line resolved against a program.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRef {
    pub thread: String,
    pub ordinal: usize,
    pub statement: StatementRef,
}

impl EventRef {
    pub fn key(&self) -> EventKey {
        EventKey {
            thread: self.thread.clone(),
            ordinal: self.ordinal,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("line {line}: expected `[thread] statement`")]
    Malformed { line: usize },
    #[error("line {line}: unknown thread `{thread}`")]
    UnknownThread { line: usize, thread: String },
    #[error("line {line}: `{text}` is not a statement of thread `{thread}`")]
    UnmatchedStatement {
        line: usize,
        thread: String,
        text: String,
    },
    #[error("line {line}: `{text}` occurs more often than thread `{thread}` executes it")]
    TooManyOccurrences {
        line: usize,
        thread: String,
        text: String,
    },
}

pub fn format_line(thread: &str, display: &str) -> String {
    format!("[{thread}] {display}")
}

/// Splits `[thread] text` into its parts.
pub fn split_line(line: &str) -> Option<(&str, &str)> {
    let rest = line.strip_prefix('[')?;
    let close = rest.find(']')?;
    let thread = &rest[..close];
    let text = rest[close + 1..].strip_prefix(' ')?;
    (!thread.is_empty()).then_some((thread, text))
}

pub fn render_trace_text(trace: &Trace) -> Vec<String> {
    trace
        .events
        .iter()
        .map(|e| format_line(&e.thread, &e.display))
        .collect()
}

/// Resolves trace lines to events of `program`.
///
/// Lines with identical text in one thread are matched by occurrence: the
/// k-th such line in the input is the k-th such event in program order.
pub fn parse_trace_text<S: AsRef<str>>(
    lines: &[S],
    program: &ProgramModel,
) -> Result<Vec<EventRef>, TraceError> {
    let mut indexes: Vec<Option<HashMap<&str, Vec<usize>>>> = vec![None; program.thread_count()];
    let mut seen: HashMap<(usize, &str), usize> = HashMap::new();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let line_no = i + 1;
        let (thread, text) =
            split_line(line.as_ref()).ok_or(TraceError::Malformed { line: line_no })?;
        let t = program
            .thread_index(thread)
            .ok_or_else(|| TraceError::UnknownThread {
                line: line_no,
                thread: thread.to_string(),
            })?;
        let index = indexes[t].get_or_insert_with(|| program.display_index(t));
        let ordinals = index
            .get(text)
            .ok_or_else(|| TraceError::UnmatchedStatement {
                line: line_no,
                thread: thread.to_string(),
                text: text.to_string(),
            })?;
        let count = seen.entry((t, text)).or_insert(0);
        let ordinal = *ordinals
            .get(*count)
            .ok_or_else(|| TraceError::TooManyOccurrences {
                line: line_no,
                thread: thread.to_string(),
                text: text.to_string(),
            })?;
        *count += 1;
        out.push(EventRef {
            thread: thread.to_string(),
            ordinal,
            statement: program.program_order(t)[ordinal].statement,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("unknown thread `{0}`")]
pub struct UnknownThread(pub String);

/// Events of one thread, in trace order.
pub fn project_thread<'t>(trace: &'t Trace, thread: &str) -> Result<Vec<&'t Event>, UnknownThread> {
    if !trace.threads.iter().any(|t| t == thread) {
        return Err(UnknownThread(thread.to_string()));
    }
    Ok(trace
        .events
        .iter()
        .filter(|e| &*e.thread == thread)
        .collect())
}
