//! Grading of the trace-ordering test.
//!
//! A learner rearranges the lines of a trace. Errors are counted in two
//! tiers: first execution-order violations (an event placed before its
//! prerequisite), and only when there are none, violations of the
//! exercise's predefined retrieval-update order.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exercise::{Exercise, ExerciseError};
use crate::program::ProgramModel;
use crate::replay::{AccessKind, ExecutionResult};
use crate::trace::{parse_trace_text, EventKey, EventRef, TraceError};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Arrangement {
    pub ordered_lines: Vec<String>,
}

impl Arrangement {
    pub fn new<I, S>(lines: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Arrangement {
            ordered_lines: lines.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RuKind {
    Retrieval,
    Update,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuStep {
    pub thread: String,
    pub ordinal: usize,
    pub kind: RuKind,
}

impl RuStep {
    fn key(&self) -> EventKey {
        EventKey {
            thread: self.thread.clone(),
            ordinal: self.ordinal,
        }
    }
}

/// The order in which one variable is updated and retrieved in the correct
/// trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuOrder {
    pub variable: String,
    pub sequence: Vec<RuStep>,
}

impl RuOrder {
    /// Updates are initialisations, increments and decrements; retrievals are
    /// reads whose value reaches a print.
    pub fn derive(execution: &ExecutionResult, variable: &str) -> Self {
        let sequence = execution
            .accesses
            .iter()
            .filter(|a| a.var == variable)
            .filter_map(|a| {
                let kind = match a.kind {
                    AccessKind::Write => RuKind::Update,
                    AccessKind::Read if a.feeds_output => RuKind::Retrieval,
                    AccessKind::Read => return None,
                };
                Some(RuStep {
                    thread: a.thread.to_string(),
                    ordinal: a.ordinal,
                    kind,
                })
            })
            .collect();
        RuOrder {
            variable: variable.to_string(),
            sequence,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GradeReport {
    pub exec_violation_positions: Vec<usize>,
    pub ru_violation_positions: Vec<usize>,
    pub errors: usize,
    pub total_choices: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GradeError {
    #[error(transparent)]
    Parse(#[from] TraceError),
    #[error(transparent)]
    Exercise(#[from] ExerciseError),
    #[error("arrangement is not a permutation of the ordering items (missing: {missing:?}, unexpected: {unexpected:?})")]
    NotAPermutation {
        missing: Vec<String>,
        unexpected: Vec<String>,
    },
}

/// Positions (1-based) of events placed before their prerequisite: the
/// preceding event of the same thread, or for a thread's first event, the
/// event that starts it.
pub fn execution_order_violations(
    program: &ProgramModel,
    arrangement: &Arrangement,
) -> Result<Vec<usize>, GradeError> {
    let refs = parse_trace_text(&arrangement.ordered_lines, program)?;
    Ok(exec_violations(program, &refs))
}

fn prerequisite(program: &ProgramModel, r: &EventRef) -> Option<EventKey> {
    if r.ordinal > 0 {
        return Some(EventKey {
            thread: r.thread.clone(),
            ordinal: r.ordinal - 1,
        });
    }
    let t = program.thread_index(&r.thread)?;
    program.spawn_ordinal(t).map(|ordinal| EventKey {
        thread: program.thread_name(0).to_string(),
        ordinal,
    })
}

fn exec_violations(program: &ProgramModel, refs: &[EventRef]) -> Vec<usize> {
    let mut placed: HashSet<EventKey> = HashSet::with_capacity(refs.len());
    let mut out = Vec::new();
    for (i, r) in refs.iter().enumerate() {
        if let Some(pre) = prerequisite(program, r) {
            if !placed.contains(&pre) {
                out.push(i + 1);
            }
        }
        placed.insert(r.key());
    }
    out
}

/// Positions (1-based) of retrieval/update events whose predecessor in the
/// predefined order has not been placed yet. Meaningful only for an
/// arrangement without execution-order violations.
pub fn retrieval_update_violations(
    exercise: &Exercise,
    arrangement: &Arrangement,
) -> Result<Vec<usize>, GradeError> {
    let program = exercise.program()?;
    let refs = parse_trace_text(&arrangement.ordered_lines, program)?;
    Ok(ru_violations(&exercise.retrieval_update_order, &refs))
}

fn ru_violations(orders: &[RuOrder], refs: &[EventRef]) -> Vec<usize> {
    let mut positions = Vec::new();
    for order in orders {
        let index: HashMap<EventKey, usize> = order
            .sequence
            .iter()
            .enumerate()
            .map(|(i, s)| (s.key(), i))
            .collect();
        let mut placed = vec![false; order.sequence.len()];
        for (pos, r) in refs.iter().enumerate() {
            let Some(&i) = index.get(&r.key()) else {
                continue;
            };
            if i > 0 && !placed[i - 1] {
                positions.push(pos + 1);
            }
            placed[i] = true;
        }
    }
    positions.sort_unstable();
    positions.dedup();
    positions
}

fn check_permutation(items: &[String], lines: &[String]) -> Result<(), GradeError> {
    let mut counts: BTreeMap<&str, i64> = BTreeMap::new();
    for l in items {
        *counts.entry(l).or_insert(0) += 1;
    }
    for l in lines {
        *counts.entry(l).or_insert(0) -= 1;
    }
    let mut missing = Vec::new();
    let mut unexpected = Vec::new();
    for (line, n) in counts {
        for _ in 0..n.max(0) {
            missing.push(line.to_string());
        }
        for _ in 0..(-n).max(0) {
            unexpected.push(line.to_string());
        }
    }
    if missing.is_empty() && unexpected.is_empty() {
        Ok(())
    } else {
        Err(GradeError::NotAPermutation {
            missing,
            unexpected,
        })
    }
}

/// Grades an arrangement of the exercise's ordering items.
pub fn grade_ordering(
    exercise: &Exercise,
    arrangement: &Arrangement,
) -> Result<GradeReport, GradeError> {
    check_permutation(&exercise.ordering_items, &arrangement.ordered_lines)?;
    let program = exercise.program()?;
    let refs = parse_trace_text(&arrangement.ordered_lines, program)?;
    let exec = exec_violations(program, &refs);
    let ru = if exec.is_empty() {
        ru_violations(&exercise.retrieval_update_order, &refs)
    } else {
        Vec::new()
    };
    let errors = if exec.is_empty() {
        ru.len()
    } else {
        exec.len()
    };
    let total = exercise.ordering_items.len();
    let accuracy = if total == 0 {
        1.0
    } else {
        1.0 - errors as f64 / total as f64
    };
    Ok(GradeReport {
        exec_violation_positions: exec,
        ru_violation_positions: ru,
        errors,
        total_choices: total,
        accuracy,
    })
}
