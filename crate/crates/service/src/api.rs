//! Service operations behind the HTTP routes. Grading is done here, on the
//! server; responses carry verdicts but never expected values before the
//! learner has earned them.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use threadtrace_core::layout::{replay_at, ReplayStateError};
use threadtrace_core::ordering::GradeError;
use threadtrace_core::trace::parse_trace_text;
use threadtrace_core::{
    grade_fill_in, grade_ordering, is_correct_choice, layout, replay, replay_init, replay_step,
    Arrangement, Direction, Exercise, ExerciseError, GradeReport, ReplayState, Schedule,
    TableLayout,
};

use crate::log::{
    AttemptLog, AttemptRecord, Clock, LogEntry, LogError, SessionStats, TaskKind, Verdict,
};
use crate::store::ExerciseStore;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    /// The request is valid but not allowed yet (fill-in before a correct
    /// selection).
    #[error("{0}")]
    Locked(String),
    #[error("{0}")]
    Internal(String),
}

impl From<LogError> for ApiError {
    fn from(e: LogError) -> Self {
        ApiError::Internal(e.to_string())
    }
}

fn internal(e: ExerciseError) -> ApiError {
    ApiError::Internal(e.to_string())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExerciseSummary {
    pub id: String,
    pub title: String,
    pub choice_count: usize,
    pub tracked_vars: Vec<String>,
    pub ordering_item_count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FillInRows {
    pub variable: String,
    pub rows: Vec<usize>,
}

/// The fill-in task: the correct trace's table with the rows to fill.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FillInView {
    pub layout: TableLayout,
    pub trace_lines: Vec<String>,
    pub sheets: Vec<FillInRows>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExerciseView {
    pub id: String,
    pub title: String,
    pub program_source: String,
    pub given_output: Vec<String>,
    pub choices: Vec<Vec<String>>,
    pub tracked_vars: Vec<String>,
    /// Trace lines for the ordering test, shuffled.
    pub ordering_items: Vec<String>,
    /// Present once the learner has answered the selection question
    /// correctly in the current session.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fill_in: Option<FillInView>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SelectionRequest {
    pub learner: String,
    pub exercise_id: String,
    pub choice_index: usize,
}

/// What the replay screen needs for the chosen trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReplayBundle {
    pub choice_index: usize,
    pub lines: Vec<String>,
    pub source_lines: Vec<u32>,
    /// Absent when the chosen order cannot execute.
    pub layout: Option<TableLayout>,
    pub initial: ReplayState,
    pub step_endpoint: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SelectionResponse {
    pub correct: bool,
    pub attempt_number: u32,
    pub fill_in_unlocked: bool,
    pub answer_again: bool,
    pub replay: ReplayBundle,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FillInRequest {
    pub learner: String,
    pub exercise_id: String,
    /// Per tracked variable, row → value (null for a blank cell).
    pub answers: BTreeMap<String, BTreeMap<usize, Option<i64>>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CellResult {
    pub row: usize,
    pub submitted: Option<i64>,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SheetResult {
    pub variable: String,
    pub cells: Vec<CellResult>,
    pub incorrect_rows: Vec<usize>,
    pub all_correct: bool,
    pub hint_rows: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FillInResponse {
    pub sheets: Vec<SheetResult>,
    pub all_correct: bool,
    pub attempt_number: u32,
    pub session_complete: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OrderingRequest {
    pub learner: String,
    pub exercise_id: String,
    pub arrangement: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OrderingResponse {
    pub report: GradeReport,
    pub attempt_number: u32,
}

/// One choice resolved against the program.
struct ChoiceRows {
    lines: Vec<String>,
    source_lines: Vec<u32>,
    layout: Option<TableLayout>,
}

pub struct Service {
    store: ExerciseStore,
    log: AttemptLog,
    clock: Arc<dyn Clock>,
    seed: u64,
}

fn check_learner(name: &str) -> Result<&str, ApiError> {
    let name = name.trim();
    if name.is_empty() {
        return Err(ApiError::BadRequest(
            "learner name must not be empty".into(),
        ));
    }
    Ok(name)
}

impl Service {
    pub fn new(store: ExerciseStore, log: AttemptLog, clock: Arc<dyn Clock>, seed: u64) -> Self {
        Service {
            store,
            log,
            clock,
            seed,
        }
    }

    pub fn store(&self) -> &ExerciseStore {
        &self.store
    }

    fn exercise(&self, id: &str) -> Result<&Arc<Exercise>, ApiError> {
        self.store
            .get(id)
            .ok_or_else(|| ApiError::NotFound(format!("no exercise `{id}`")))
    }

    pub fn list_exercises(&self) -> Vec<ExerciseSummary> {
        self.store
            .iter()
            .map(|e| ExerciseSummary {
                id: e.id.clone(),
                title: e.title.clone(),
                choice_count: e.choices.len(),
                tracked_vars: e.tracked_vars.clone(),
                ordering_item_count: e.ordering_items.len(),
            })
            .collect()
    }

    /// Ordering items in a fixed shuffled order, never the stored (correct)
    /// order when another order exists.
    fn shuffled_items(&self, exercise: &Exercise) -> Vec<String> {
        let mut items = exercise.ordering_items.clone();
        let distinct: BTreeSet<&String> = exercise.ordering_items.iter().collect();
        if distinct.len() < 2 {
            return items;
        }
        let id_hash = exercise.id.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x100_0000_01b3)
        });
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ id_hash);
        loop {
            items.shuffle(&mut rng);
            if items != exercise.ordering_items {
                return items;
            }
        }
    }

    fn fill_in_view(&self, exercise: &Exercise) -> Result<FillInView, ApiError> {
        let execution = exercise.correct_execution().map_err(internal)?;
        let sheets = exercise.fill_in_sheets().map_err(internal)?;
        let rows: BTreeSet<usize> = sheets.iter().flat_map(|s| s.rows()).collect();
        Ok(FillInView {
            layout: layout(&execution.trace).with_input_rows(rows),
            trace_lines: threadtrace_core::render_trace_text(&execution.trace),
            sheets: sheets
                .iter()
                .map(|s| FillInRows {
                    variable: s.variable.clone(),
                    rows: s.rows(),
                })
                .collect(),
        })
    }

    /// The learner-facing view. Naming a learner opens a session (if none
    /// is open) and reveals the fill-in task once it is unlocked.
    pub fn get_exercise(&self, id: &str, learner: Option<&str>) -> Result<ExerciseView, ApiError> {
        let exercise = self.exercise(id)?;
        let mut unlocked = false;
        if let Some(learner) = learner {
            let learner = check_learner(learner)?;
            let now = self.clock.now();
            unlocked = self.log.append_with(|state| {
                let entry = (!state.has_open_session(learner, id)).then(|| LogEntry::Opened {
                    learner_name: learner.to_string(),
                    exercise_id: id.to_string(),
                    at: now,
                });
                (entry, state.fill_in_unlocked(learner, id))
            })?;
        }
        Ok(ExerciseView {
            id: exercise.id.clone(),
            title: exercise.title.clone(),
            program_source: exercise.program_source.clone(),
            given_output: exercise.given_output.clone(),
            choices: exercise.choices.iter().map(|c| c.lines.clone()).collect(),
            tracked_vars: exercise.tracked_vars.clone(),
            ordering_items: self.shuffled_items(exercise),
            fill_in: if unlocked {
                Some(self.fill_in_view(exercise)?)
            } else {
                None
            },
        })
    }

    fn choice_rows(&self, exercise: &Exercise, choice: usize) -> Result<ChoiceRows, ApiError> {
        let program = exercise.program().map_err(internal)?;
        let lines = exercise
            .choices
            .get(choice)
            .ok_or_else(|| {
                ApiError::BadRequest(format!(
                    "choice {choice} is out of range (exercise has {} choices)",
                    exercise.choices.len()
                ))
            })?
            .lines
            .clone();
        let refs = parse_trace_text(&lines, program)
            .map_err(|e| ApiError::Internal(format!("choice {choice}: {e}")))?;
        let source_lines = refs
            .iter()
            .map(|r| program.statement(r.statement).line)
            .collect();
        let schedule = Schedule::from_names(refs.iter().map(|r| r.thread.as_str()));
        let table = replay(program, &schedule)
            .ok()
            .filter(|r| threadtrace_core::render_trace_text(&r.trace) == lines)
            .map(|r| layout(&r.trace));
        Ok(ChoiceRows {
            lines,
            source_lines,
            layout: table,
        })
    }

    pub fn submit_selection(&self, req: &SelectionRequest) -> Result<SelectionResponse, ApiError> {
        let learner = check_learner(&req.learner)?;
        let exercise = self.exercise(&req.exercise_id)?;
        let ChoiceRows {
            lines,
            source_lines,
            layout: table,
        } = self.choice_rows(exercise, req.choice_index)?;
        let correct = is_correct_choice(exercise, req.choice_index).map_err(internal)?;
        let now = self.clock.now();
        let attempt_number = self.log.append_with(|state| {
            let n = state.attempt_count(learner, &exercise.id, TaskKind::Selection) + 1;
            let record = AttemptRecord {
                learner_name: learner.to_string(),
                exercise_id: exercise.id.clone(),
                task_kind: TaskKind::Selection,
                attempt_number: n,
                submitted_at: now,
                payload: serde_json::json!({ "choiceIndex": req.choice_index }),
                verdict: Verdict {
                    correct,
                    detail: serde_json::Value::Null,
                },
            };
            (Some(LogEntry::Attempt(record)), n)
        })?;
        let initial =
            replay_init(source_lines.as_slice()).map_err(|e| ApiError::Internal(e.to_string()))?;
        Ok(SelectionResponse {
            correct,
            attempt_number,
            fill_in_unlocked: correct,
            answer_again: !correct,
            replay: ReplayBundle {
                choice_index: req.choice_index,
                lines,
                source_lines,
                layout: table,
                initial,
                step_endpoint: format!(
                    "/exercises/{}/replay?choice={}",
                    exercise.id, req.choice_index
                ),
            },
        })
    }

    pub fn submit_fill_in(&self, req: &FillInRequest) -> Result<FillInResponse, ApiError> {
        let learner = check_learner(&req.learner)?;
        let exercise = self.exercise(&req.exercise_id)?;
        let sheets = exercise.fill_in_sheets().map_err(internal)?;
        if let Some(unknown) = req
            .answers
            .keys()
            .find(|v| !sheets.iter().any(|s| &s.variable == *v))
        {
            return Err(ApiError::BadRequest(format!(
                "`{unknown}` is not a tracked variable of `{}`",
                exercise.id
            )));
        }
        let empty = BTreeMap::new();
        let grades: Vec<_> = sheets
            .iter()
            .map(|s| grade_fill_in(s, req.answers.get(&s.variable).unwrap_or(&empty)))
            .collect();
        let all_correct = grades.iter().all(|g| g.all_correct);
        let results: Vec<SheetResult> = grades
            .iter()
            .map(|g| SheetResult {
                variable: g.variable.clone(),
                cells: g
                    .verdicts
                    .iter()
                    .map(|v| CellResult {
                        row: v.row,
                        submitted: v.submitted,
                        correct: v.correct,
                    })
                    .collect(),
                incorrect_rows: g.incorrect_rows(),
                all_correct: g.all_correct,
                hint_rows: g.hint_rows.clone(),
            })
            .collect();
        let now = self.clock.now();
        let id = exercise.id.as_str();
        let attempt_number = self.log.append_with(|state| {
            if !state.fill_in_unlocked(learner, id) {
                return (None, None);
            }
            let n = state.attempt_count(learner, id, TaskKind::Fillin) + 1;
            let record = AttemptRecord {
                learner_name: learner.to_string(),
                exercise_id: id.to_string(),
                task_kind: TaskKind::Fillin,
                attempt_number: n,
                submitted_at: now,
                payload: serde_json::to_value(&req.answers).expect("answers serialise"),
                verdict: Verdict {
                    correct: all_correct,
                    detail: serde_json::json!({
                        "incorrectRows": results
                            .iter()
                            .map(|s| (s.variable.clone(), s.incorrect_rows.clone()))
                            .collect::<BTreeMap<_, _>>()
                    }),
                },
            };
            (Some(LogEntry::Attempt(record)), Some(n))
        })?;
        let attempt_number = attempt_number.ok_or_else(|| {
            ApiError::Locked(format!(
                "answer the selection question of `{id}` correctly before the fill-in task"
            ))
        })?;
        Ok(FillInResponse {
            sheets: results,
            all_correct,
            attempt_number,
            session_complete: all_correct,
        })
    }

    pub fn submit_ordering(&self, req: &OrderingRequest) -> Result<OrderingResponse, ApiError> {
        let learner = check_learner(&req.learner)?;
        let exercise = self.exercise(&req.exercise_id)?;
        let report = grade_ordering(exercise, &Arrangement::new(req.arrangement.iter().cloned()))
            .map_err(|e| match e {
            GradeError::Exercise(e) => internal(e),
            e => ApiError::BadRequest(e.to_string()),
        })?;
        let now = self.clock.now();
        let attempt_number = self.log.append_with(|state| {
            let n = state.attempt_count(learner, &exercise.id, TaskKind::Ordering) + 1;
            let record = AttemptRecord {
                learner_name: learner.to_string(),
                exercise_id: exercise.id.clone(),
                task_kind: TaskKind::Ordering,
                attempt_number: n,
                submitted_at: now,
                payload: serde_json::json!({ "arrangement": req.arrangement }),
                verdict: Verdict {
                    correct: report.errors == 0,
                    detail: serde_json::to_value(&report).expect("reports serialise"),
                },
            };
            (Some(LogEntry::Attempt(record)), n)
        })?;
        Ok(OrderingResponse {
            report,
            attempt_number,
        })
    }

    pub fn session_stats(&self, learner: &str) -> Vec<SessionStats> {
        self.log.read(|s| s.session_stats(learner.trim()))
    }

    /// Cursor state over one choice's rows: the first row when no cursor is
    /// given, otherwise `cursor` moved one step in `dir` (if given).
    pub fn replay(
        &self,
        id: &str,
        choice: usize,
        cursor: Option<usize>,
        dir: Option<Direction>,
    ) -> Result<ReplayState, ApiError> {
        let exercise = self.exercise(id)?;
        let source_lines = self.choice_rows(exercise, choice)?.source_lines;
        let rows = source_lines.as_slice();
        let bad = |e: ReplayStateError| ApiError::BadRequest(e.to_string());
        let state = match cursor {
            None => replay_init(rows).map_err(bad)?,
            Some(c) => replay_at(rows, c).map_err(bad)?,
        };
        Ok(match dir {
            Some(d) => replay_step(state, d, rows),
            None => state,
        })
    }
}
