//! Geometry of the enhanced trace table and the replay cursor.
//!
//! Each thread gets a column holding a tree of boxes: a synthetic root box
//! for the thread's root method, and one box per event nested one level to
//! the right of the call it belongs to. Rows are trace positions, so a
//! thread's column shows empty interior rows while other threads run.
//!
//! Colour indices follow thread column order; clients map 0 to yellow
//! (main) and 1 to green, with further hues after that.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::Trace;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TableBox {
    pub thread: String,
    pub depth: usize,
    pub start_row: usize,
    pub end_row: usize,
    pub label: String,
    pub synthetic: bool,
    pub color_index: usize,
    /// The event drawn by this box; absent for thread roots.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub event_seq: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TableLayout {
    pub row_count: usize,
    pub thread_columns: Vec<String>,
    pub boxes: Vec<TableBox>,
    pub input_rows: Vec<usize>,
}

impl TableLayout {
    pub fn root(&self, thread: &str) -> Option<&TableBox> {
        self.boxes
            .iter()
            .find(|b| b.synthetic && b.thread == thread)
    }

    pub fn event_box(&self, seq: usize) -> Option<&TableBox> {
        self.boxes.iter().find(|b| b.event_seq == Some(seq))
    }

    /// Rows inside a thread's root span where another thread is running.
    pub fn gap_rows(&self, thread: &str) -> Vec<usize> {
        let Some(root) = self.root(thread) else {
            return Vec::new();
        };
        (root.start_row..=root.end_row)
            .filter(|&row| {
                !self
                    .boxes
                    .iter()
                    .any(|b| !b.synthetic && b.thread == thread && b.start_row == row)
            })
            .collect()
    }

    /// Limits input fields to the given rows (e.g. the rows of a fill-in
    /// sheet).
    pub fn with_input_rows(mut self, rows: impl IntoIterator<Item = usize>) -> Self {
        self.input_rows = rows
            .into_iter()
            .filter(|&r| r >= 1 && r <= self.row_count)
            .collect();
        self.input_rows.sort_unstable();
        self.input_rows.dedup();
        self
    }
}

/// Computes the table layout of a trace. Every row carries an input field
/// until narrowed with [`TableLayout::with_input_rows`].
pub fn layout(trace: &Trace) -> TableLayout {
    let n = trace.len();
    let column = |thread: &str| trace.threads.iter().position(|t| t == thread).unwrap_or(0);

    // Last descendant row of every event, filled from the back so children
    // are final before their parents read them.
    let mut span_end: Vec<usize> = (1..=n).collect();
    for e in trace.events.iter().rev() {
        if e.parent_seq > 0 {
            let end = span_end[e.seq - 1];
            let parent = &mut span_end[e.parent_seq - 1];
            *parent = (*parent).max(end);
        }
    }

    let mut boxes = Vec::with_capacity(n + trace.threads.len());
    for (c, thread) in trace.threads.iter().enumerate() {
        let mut rows = trace
            .events
            .iter()
            .filter(|e| *e.thread == **thread)
            .map(|e| e.seq);
        let Some(first) = rows.next() else { continue };
        let last = rows.next_back().unwrap_or(first);
        boxes.push(TableBox {
            thread: thread.clone(),
            depth: 0,
            start_row: first,
            end_row: last,
            label: trace.root_methods.get(c).cloned().unwrap_or_default(),
            synthetic: true,
            color_index: c,
            event_seq: None,
        });
    }
    for e in &trace.events {
        boxes.push(TableBox {
            thread: e.thread.to_string(),
            depth: e.depth + 1,
            start_row: e.seq,
            end_row: span_end[e.seq - 1],
            label: e.display.to_string(),
            synthetic: false,
            color_index: column(&e.thread),
            event_seq: Some(e.seq),
        });
    }
    TableLayout {
        row_count: n,
        thread_columns: trace.threads.clone(),
        boxes,
        input_rows: (1..=n).collect(),
    }
}

/// Anything that can be stepped through row by row.
pub trait Replayable {
    fn row_count(&self) -> usize;
    /// Source line of the statement at a 1-based row.
    fn source_line(&self, row: usize) -> u32;
}

impl Replayable for Trace {
    fn row_count(&self) -> usize {
        self.len()
    }

    fn source_line(&self, row: usize) -> u32 {
        self.events[row - 1].source_line
    }
}

/// Rows of an arbitrary (possibly infeasible) ordering, by source line.
impl Replayable for [u32] {
    fn row_count(&self) -> usize {
        self.len()
    }

    fn source_line(&self, row: usize) -> u32 {
        self[row - 1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReplayState {
    pub cursor: usize,
    pub highlighted_source_line: u32,
    pub highlighted_trace_row: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ReplayStateError {
    #[error("cannot replay an empty trace")]
    EmptyTrace,
    #[error("cursor {cursor} is outside rows 1..={rows}")]
    OutOfRange { cursor: usize, rows: usize },
}

/// State for `cursor`, which must lie within the trace.
pub fn replay_at<R: Replayable + ?Sized>(
    trace: &R,
    cursor: usize,
) -> Result<ReplayState, ReplayStateError> {
    let rows = trace.row_count();
    if rows == 0 {
        return Err(ReplayStateError::EmptyTrace);
    }
    if cursor == 0 || cursor > rows {
        return Err(ReplayStateError::OutOfRange { cursor, rows });
    }
    Ok(ReplayState {
        cursor,
        highlighted_source_line: trace.source_line(cursor),
        highlighted_trace_row: cursor,
    })
}

/// Initial replay position: the first row.
pub fn replay_init<R: Replayable + ?Sized>(trace: &R) -> Result<ReplayState, ReplayStateError> {
    replay_at(trace, 1)
}

/// Moves the cursor one row, saturating at the first and last rows.
pub fn replay_step<R: Replayable + ?Sized>(
    state: ReplayState,
    direction: Direction,
    trace: &R,
) -> ReplayState {
    let rows = trace.row_count().max(1);
    let cursor = match direction {
        Direction::Forward => (state.cursor + 1).min(rows),
        Direction::Backward => state.cursor.saturating_sub(1).max(1),
    };
    ReplayState {
        cursor,
        highlighted_source_line: trace.source_line(cursor),
        highlighted_trace_row: cursor,
    }
}
