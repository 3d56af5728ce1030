//! Trace-selection and fill-in exercises: authoring, validation, answer
//! checking and hint rows.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::explore::{feasible, sample_schedule};
use crate::ordering::RuOrder;
use crate::parse::{parse_program, ParseError};
use crate::program::{ProgramModel, StatementKind};
use crate::replay::{replay, AccessKind, ExecutionResult, ReplayError, Schedule};
use crate::trace::{parse_trace_text, render_trace_text, Trace, TraceError};

/// Version tag carried by every exercise file.
pub const EXERCISE_SCHEMA: &str = "threadtrace.exercise/v1";

/// Default number of answer choices in a selection question.
pub const DEFAULT_CHOICES: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceTrace {
    pub lines: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Exercise {
    pub schema: String,
    pub id: String,
    pub title: String,
    pub program_source: String,
    pub given_output: Vec<String>,
    pub correct_schedule: Schedule,
    pub choices: Vec<ChoiceTrace>,
    pub correct_choice_index: usize,
    pub tracked_vars: Vec<String>,
    pub ordering_items: Vec<String>,
    pub retrieval_update_order: Vec<RuOrder>,
    #[serde(skip)]
    prepared: OnceLock<Result<Prepared, ExerciseError>>,
}

impl Clone for Exercise {
    fn clone(&self) -> Self {
        Exercise {
            schema: self.schema.clone(),
            id: self.id.clone(),
            title: self.title.clone(),
            program_source: self.program_source.clone(),
            given_output: self.given_output.clone(),
            correct_schedule: self.correct_schedule.clone(),
            choices: self.choices.clone(),
            correct_choice_index: self.correct_choice_index,
            tracked_vars: self.tracked_vars.clone(),
            ordering_items: self.ordering_items.clone(),
            retrieval_update_order: self.retrieval_update_order.clone(),
            prepared: OnceLock::new(),
        }
    }
}

#[derive(Debug)]
struct Prepared {
    program: ProgramModel,
    execution: ExecutionResult,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ExerciseError {
    #[error("unsupported exercise schema `{0}`")]
    Schema(String),
    #[error("malformed exercise file: {0}")]
    Json(String),
    #[error("program: {0}")]
    Program(#[from] ParseError),
    #[error("correct schedule: {0}")]
    Replay(#[from] ReplayError),
    #[error("choice {index} is out of range (exercise has {len} choices)")]
    ChoiceOutOfRange { index: usize, len: usize },
    #[error("choice {choice}: {source}")]
    ChoiceParse { choice: usize, source: TraceError },
    #[error("variable `{0}` is never initialised")]
    NotInitialized(String),
}

impl Exercise {
    pub fn from_json(text: &str) -> Result<Self, ExerciseError> {
        let ex: Exercise =
            serde_json::from_str(text).map_err(|e| ExerciseError::Json(e.to_string()))?;
        if ex.schema != EXERCISE_SCHEMA {
            return Err(ExerciseError::Schema(ex.schema));
        }
        Ok(ex)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("exercise serialises")
    }

    fn prepared(&self) -> Result<&Prepared, ExerciseError> {
        self.prepared
            .get_or_init(|| {
                let program = parse_program(&self.program_source)?;
                let execution = replay(&program, &self.correct_schedule)?;
                Ok(Prepared { program, execution })
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn program(&self) -> Result<&ProgramModel, ExerciseError> {
        self.prepared().map(|p| &p.program)
    }

    /// Replay of the correct schedule.
    pub fn correct_execution(&self) -> Result<&ExecutionResult, ExerciseError> {
        self.prepared().map(|p| &p.execution)
    }

    /// Fill-in sheets for every tracked variable, from the correct execution.
    pub fn fill_in_sheets(&self) -> Result<Vec<FillInSheet>, ExerciseError> {
        let execution = self.correct_execution()?;
        self.tracked_vars
            .iter()
            .map(|v| expected_value_timeline(execution, v))
            .collect()
    }
}

/// What an author supplies; everything else is derived.
#[derive(Clone, Debug)]
pub struct ExerciseDraft {
    pub id: String,
    pub title: String,
    pub program_source: String,
    pub correct_schedule: Schedule,
    pub tracked_vars: Vec<String>,
    pub choice_count: usize,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum AuthorError {
    #[error(transparent)]
    Exercise(#[from] ExerciseError),
    #[error(transparent)]
    Distractors(#[from] DistractorError),
    #[error("an exercise needs at least one choice")]
    NoChoices,
}

/// Builds a complete exercise: output and trace from the correct schedule,
/// generated distractors, and the retrieval-update order of each tracked
/// variable.
pub fn author_exercise(draft: ExerciseDraft) -> Result<Exercise, AuthorError> {
    if draft.choice_count == 0 {
        return Err(AuthorError::NoChoices);
    }
    let program = parse_program(&draft.program_source).map_err(ExerciseError::from)?;
    let execution = replay(&program, &draft.correct_schedule).map_err(ExerciseError::from)?;
    let lines = render_trace_text(&execution.trace);
    let mut choices = generate_distractors(
        &program,
        &execution.trace,
        &execution.output,
        draft.choice_count - 1,
        draft.seed,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(draft.seed ^ 0x5eed_c401_ce00_0000);
    let correct_choice_index = rng.gen_range(0..draft.choice_count);
    choices.insert(
        correct_choice_index,
        ChoiceTrace {
            lines: lines.clone(),
        },
    );
    let mut retrieval_update_order = Vec::with_capacity(draft.tracked_vars.len());
    for var in &draft.tracked_vars {
        if !execution.timelines.contains_key(var) {
            return Err(ExerciseError::NotInitialized(var.clone()).into());
        }
        retrieval_update_order.push(RuOrder::derive(&execution, var));
    }
    Ok(Exercise {
        schema: EXERCISE_SCHEMA.to_string(),
        id: draft.id,
        title: draft.title,
        program_source: draft.program_source,
        given_output: execution.output.clone(),
        correct_schedule: draft.correct_schedule,
        choices,
        correct_choice_index,
        tracked_vars: draft.tracked_vars,
        ordering_items: lines,
        retrieval_update_order,
        prepared: OnceLock::new(),
    })
}

/// A choice is correct when its order is feasible and replaying the schedule
/// it induces prints exactly `given_output`.
fn judge_lines<S: AsRef<str>>(
    program: &ProgramModel,
    lines: &[S],
    given_output: &[String],
) -> Result<bool, TraceError> {
    let refs = parse_trace_text(lines, program)?;
    if !feasible(
        program,
        refs.iter().map(|r| (r.thread.as_str(), r.statement)),
    )
    .feasible
    {
        return Ok(false);
    }
    let schedule = Schedule::from_names(refs.iter().map(|r| r.thread.as_str()));
    Ok(replay(program, &schedule).is_ok_and(|r| r.output == given_output))
}

pub fn is_correct_choice(exercise: &Exercise, choice: usize) -> Result<bool, ExerciseError> {
    let program = exercise.program()?;
    let lines = &exercise
        .choices
        .get(choice)
        .ok_or(ExerciseError::ChoiceOutOfRange {
            index: choice,
            len: exercise.choices.len(),
        })?
        .lines;
    judge_lines(program, lines, &exercise.given_output)
        .map_err(|source| ExerciseError::ChoiceParse { choice, source })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum IssueKind {
    Schema,
    Program,
    CorrectSchedule,
    OutputMismatch,
    ChoiceUnparseable,
    ChoiceNotPermutation,
    CorrectIndexOutOfRange,
    NoCorrectChoice,
    MultipleCorrectChoices,
    CorrectIndexMismatch,
    TrackedVariable,
    OrderingItems,
    RetrievalUpdateOrder,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Issue {
    pub kind: IssueKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub choice: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variable: Option<String>,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidationReport {
    pub exercise_id: String,
    pub valid: bool,
    pub correct_choices: Vec<usize>,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    fn push(&mut self, kind: IssueKind, message: impl Into<String>) -> &mut Issue {
        self.issues.push(Issue {
            kind,
            choice: None,
            variable: None,
            message: message.into(),
        });
        self.issues.last_mut().unwrap()
    }
}

fn multiset<S: AsRef<str>>(lines: &[S]) -> BTreeMap<&str, usize> {
    let mut m = BTreeMap::new();
    for l in lines {
        *m.entry(l.as_ref()).or_insert(0) += 1;
    }
    m
}

/// Checks every structural invariant of an exercise, including that exactly
/// one choice is correct.
pub fn validate_exercise(exercise: &Exercise) -> ValidationReport {
    let mut report = ValidationReport {
        exercise_id: exercise.id.clone(),
        ..Default::default()
    };
    if exercise.schema != EXERCISE_SCHEMA {
        report.push(
            IssueKind::Schema,
            format!("unsupported schema `{}`", exercise.schema),
        );
    }
    let program = match parse_program(&exercise.program_source) {
        Ok(p) => p,
        Err(e) => {
            report.push(IssueKind::Program, e.to_string());
            return report;
        }
    };
    let execution = match replay(&program, &exercise.correct_schedule) {
        Ok(r) => r,
        Err(e) => {
            report.push(IssueKind::CorrectSchedule, e.to_string());
            return report;
        }
    };
    if execution.output != exercise.given_output {
        report.push(
            IssueKind::OutputMismatch,
            "replaying the correct schedule does not print the given output",
        );
    }
    let correct_lines = render_trace_text(&execution.trace);
    let correct_set = multiset(&correct_lines);

    for (i, choice) in exercise.choices.iter().enumerate() {
        if multiset(&choice.lines) != correct_set {
            report
                .push(
                    IssueKind::ChoiceNotPermutation,
                    format!("choice {i} is not a reordering of the correct trace"),
                )
                .choice = Some(i);
        }
        match judge_lines(&program, &choice.lines, &exercise.given_output) {
            Ok(true) => report.correct_choices.push(i),
            Ok(false) => {}
            Err(e) => {
                report
                    .push(IssueKind::ChoiceUnparseable, format!("choice {i}: {e}"))
                    .choice = Some(i);
            }
        }
    }
    let correct = report.correct_choices.clone();
    match correct.as_slice() {
        [] => {
            report.push(IssueKind::NoCorrectChoice, "no choice is correct");
        }
        [only] => {
            if *only != exercise.correct_choice_index {
                report
                    .push(
                        IssueKind::CorrectIndexMismatch,
                        format!(
                            "choice {only} is the correct one but correctChoiceIndex is {}",
                            exercise.correct_choice_index
                        ),
                    )
                    .choice = Some(*only);
            }
        }
        many => {
            for &i in &many[1..] {
                report
                    .push(
                        IssueKind::MultipleCorrectChoices,
                        format!("choice {i} is also correct (first correct is {})", many[0]),
                    )
                    .choice = Some(i);
            }
        }
    }
    if exercise.correct_choice_index >= exercise.choices.len() {
        report.push(
            IssueKind::CorrectIndexOutOfRange,
            format!(
                "correctChoiceIndex {} is out of range for {} choices",
                exercise.correct_choice_index,
                exercise.choices.len()
            ),
        );
    }

    for var in &exercise.tracked_vars {
        if let Err(message) = check_tracked_var(&program, &execution, var) {
            report.push(IssueKind::TrackedVariable, message).variable = Some(var.clone());
        }
    }
    if exercise.ordering_items != correct_lines {
        report.push(
            IssueKind::OrderingItems,
            "orderingItems must list the correct trace in order",
        );
    }
    let stored: BTreeMap<&str, &RuOrder> = exercise
        .retrieval_update_order
        .iter()
        .map(|o| (o.variable.as_str(), o))
        .collect();
    for var in &exercise.tracked_vars {
        if !execution.timelines.contains_key(var) {
            continue;
        }
        let derived = RuOrder::derive(&execution, var);
        if stored.get(var.as_str()) != Some(&&derived) {
            report
                .push(
                    IssueKind::RetrievalUpdateOrder,
                    format!("retrieval-update order for `{var}` does not match the correct trace"),
                )
                .variable = Some(var.clone());
        }
    }
    for o in &exercise.retrieval_update_order {
        if !exercise.tracked_vars.contains(&o.variable) {
            report
                .push(
                    IssueKind::RetrievalUpdateOrder,
                    format!(
                        "retrieval-update order given for untracked `{}`",
                        o.variable
                    ),
                )
                .variable = Some(o.variable.clone());
        }
    }
    report.valid = report.issues.is_empty();
    report
}

/// A tracked variable is shared, modified by at least two threads and read
/// into some printed value.
fn check_tracked_var(
    program: &ProgramModel,
    execution: &ExecutionResult,
    var: &str,
) -> Result<(), String> {
    if !program.shared_vars.iter().any(|v| v.name == var) {
        return Err(format!("`{var}` is not a shared variable"));
    }
    let writers: BTreeSet<&str> = execution
        .accesses
        .iter()
        .filter(|a| a.var == var && a.kind == AccessKind::Write)
        .filter(|a| {
            let ev = &execution.trace.events[a.seq - 1];
            !matches!(
                program.statement(ev.statement).kind,
                StatementKind::SharedInit { .. }
            )
        })
        .map(|a| &*a.thread)
        .collect();
    if writers.len() < 2 {
        return Err(format!(
            "`{var}` is modified by {} thread(s); a tracked variable needs at least two",
            writers.len()
        ));
    }
    let printed = execution
        .accesses
        .iter()
        .any(|a| a.var == var && a.kind == AccessKind::Read && a.feeds_output);
    if !printed {
        return Err(format!("`{var}` never reaches the output"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("could only generate {found} of {wanted} distinct incorrect choices")]
pub struct DistractorError {
    pub wanted: usize,
    pub found: usize,
}

/// Generates `count` distinct incorrect reorderings of `correct`.
///
/// Strategies rotate between swapping a call with its first nested event
/// (infeasible), taking another random feasible schedule whose output
/// differs, swapping two adjacent events of different threads, and swapping
/// two arbitrary lines. Every candidate is re-checked and kept only if it is
/// wrong.
pub fn generate_distractors(
    program: &ProgramModel,
    correct: &Trace,
    given_output: &[String],
    count: usize,
    seed: u64,
) -> Result<Vec<ChoiceTrace>, DistractorError> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lines = render_trace_text(correct);
    let events = &correct.events;
    let call_children: Vec<(usize, usize)> = events
        .iter()
        .filter_map(|e| {
            events
                .iter()
                .find(|c| c.parent_seq == e.seq)
                .map(|c| (e.seq - 1, c.seq - 1))
        })
        .collect();
    let cross_adjacent: Vec<usize> = (0..events.len().saturating_sub(1))
        .filter(|&i| events[i].thread != events[i + 1].thread)
        .collect();

    let mut seen: HashSet<Vec<String>> = HashSet::from([lines.clone()]);
    let mut found = Vec::with_capacity(count);
    let budget = 256 * count;
    for attempt in 0..budget {
        if found.len() == count {
            break;
        }
        let candidate = match attempt % 4 {
            0 => call_children.choose(&mut rng).map(|&(a, b)| {
                let mut l = lines.clone();
                l.swap(a, b);
                l
            }),
            1 => {
                let schedule = sample_schedule(program, &mut rng);
                replay(program, &schedule)
                    .ok()
                    .filter(|r| r.output != given_output)
                    .map(|r| render_trace_text(&r.trace))
            }
            2 => cross_adjacent.choose(&mut rng).map(|&i| {
                let mut l = lines.clone();
                l.swap(i, i + 1);
                l
            }),
            _ => (lines.len() >= 2).then(|| {
                let a = rng.gen_range(0..lines.len());
                let b = rng.gen_range(0..lines.len());
                let mut l = lines.clone();
                l.swap(a, b);
                l
            }),
        };
        let Some(candidate) = candidate else { continue };
        if seen.contains(&candidate) {
            continue;
        }
        seen.insert(candidate.clone());
        if judge_lines(program, &candidate, given_output) == Ok(false) {
            found.push(ChoiceTrace { lines: candidate });
        }
    }
    if found.len() < count {
        return Err(DistractorError {
            wanted: count,
            found: found.len(),
        });
    }
    Ok(found)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub expected: i64,
}

/// Expected values of one variable, row by row, for the fill-in question.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FillInSheet {
    pub variable: String,
    pub cells: Vec<Cell>,
    /// Rows whose event sets the variable; shown as hints.
    pub update_rows: BTreeSet<usize>,
}

impl FillInSheet {
    pub fn rows(&self) -> Vec<usize> {
        self.cells.iter().map(|c| c.row).collect()
    }

    pub fn expected(&self, row: usize) -> Option<i64> {
        self.cells
            .binary_search_by_key(&row, |c| c.row)
            .ok()
            .map(|i| self.cells[i].expected)
    }
}

/// Value of `variable` immediately after each row, from its initialisation
/// row to the end of the trace.
pub fn expected_value_timeline(
    execution: &ExecutionResult,
    variable: &str,
) -> Result<FillInSheet, ExerciseError> {
    let points = execution
        .timelines
        .get(variable)
        .filter(|p| !p.is_empty())
        .ok_or_else(|| ExerciseError::NotInitialized(variable.to_string()))?;
    let mut cells = Vec::new();
    let mut next = points.iter().peekable();
    let mut value = points[0].value;
    for row in points[0].row..=execution.trace.len() {
        while let Some(p) = next.next_if(|p| p.row <= row) {
            value = p.value;
        }
        cells.push(Cell {
            row,
            expected: value,
        });
    }
    Ok(FillInSheet {
        variable: variable.to_string(),
        cells,
        update_rows: points.iter().map(|p| p.row).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellVerdict {
    pub row: usize,
    pub submitted: Option<i64>,
    pub expected: i64,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FillInGrade {
    pub variable: String,
    pub verdicts: Vec<CellVerdict>,
    pub all_correct: bool,
    pub hint_rows: Vec<usize>,
}

impl FillInGrade {
    pub fn incorrect_rows(&self) -> Vec<usize> {
        self.verdicts
            .iter()
            .filter(|v| !v.correct)
            .map(|v| v.row)
            .collect()
    }
}

/// Exact-match grading; blank or missing cells are incorrect. Answers for
/// rows outside the sheet are ignored.
pub fn grade_fill_in(sheet: &FillInSheet, answers: &BTreeMap<usize, Option<i64>>) -> FillInGrade {
    let verdicts: Vec<CellVerdict> = sheet
        .cells
        .iter()
        .map(|cell| {
            let submitted = answers.get(&cell.row).copied().flatten();
            CellVerdict {
                row: cell.row,
                submitted,
                expected: cell.expected,
                correct: submitted == Some(cell.expected),
            }
        })
        .collect();
    FillInGrade {
        variable: sheet.variable.clone(),
        all_correct: verdicts.iter().all(|v| v.correct),
        verdicts,
        hint_rows: sheet.update_rows.iter().copied().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{
        counter_exercise, counter_program, race_schedule, sequential_schedule, COUNTER_SOURCE,
        GOLDEN_TRACE,
    };

    fn race_exercise_with(choices: Vec<Vec<String>>, correct: usize) -> Exercise {
        let mut ex = counter_exercise();
        ex.choices = choices
            .into_iter()
            .map(|lines| ChoiceTrace { lines })
            .collect();
        ex.correct_choice_index = correct;
        ex
    }

    fn golden() -> Vec<String> {
        GOLDEN_TRACE.iter().map(|s| s.to_string()).collect()
    }

    fn sequential_lines() -> Vec<String> {
        let r = replay(&counter_program(), &sequential_schedule()).unwrap();
        render_trace_text(&r.trace)
    }

    #[test]
    fn choice_correctness() {
        let mut swapped = golden();
        swapped.swap(5, 6);
        let ex = race_exercise_with(vec![golden(), sequential_lines(), swapped], 0);
        assert!(is_correct_choice(&ex, 0).unwrap());
        // feasible, but prints 1, 0, 1, 0
        assert!(!is_correct_choice(&ex, 1).unwrap());
        // infeasible
        assert!(!is_correct_choice(&ex, 2).unwrap());
        assert_eq!(
            is_correct_choice(&ex, 3).unwrap_err(),
            ExerciseError::ChoiceOutOfRange { index: 3, len: 3 }
        );
    }

    #[test]
    fn unparseable_choice() {
        let mut bad = golden();
        bad[0] = "[main] Counter c = new Counter()".into();
        let ex = race_exercise_with(vec![golden(), bad], 0);
        assert!(matches!(
            is_correct_choice(&ex, 1).unwrap_err(),
            ExerciseError::ChoiceParse { choice: 1, .. }
        ));
        let report = validate_exercise(&ex);
        assert!(report
            .issues
            .iter()
            .any(|i| i.kind == IssueKind::ChoiceUnparseable && i.choice == Some(1)));
    }

    #[test]
    fn bundled_exercise_is_valid() {
        let ex = counter_exercise();
        let report = validate_exercise(&ex);
        assert!(report.valid, "{report:#?}");
        assert_eq!(report.correct_choices, vec![ex.correct_choice_index]);
        assert_eq!(ex.choices.len(), DEFAULT_CHOICES);
    }

    #[test]
    fn two_correct_choices_rejected() {
        // Another feasible schedule with the race output: thread-2's
        // getValue() call moves ahead of thread-1's final print.
        let mut alt = golden();
        alt.swap(16, 17);
        let ex = race_exercise_with(vec![golden(), alt.clone()], 0);
        assert!(is_correct_choice(&ex, 1).unwrap());
        let report = validate_exercise(&ex);
        assert!(!report.valid);
        assert_eq!(report.correct_choices, vec![0, 1]);
        assert!(report
            .issues
            .iter()
            .any(|i| i.kind == IssueKind::MultipleCorrectChoices && i.choice == Some(1)));
    }

    #[test]
    fn tracked_variable_rule() {
        let src = "\
method main {
    shared c = 0, d = 0
    thread a runs one
    thread b runs two
    start a
    start b
}
method one {
    c++
    d++
    local v = d
    print \"d \" + v
}
method two {
    c++
}
";
        let draft = ExerciseDraft {
            id: "single-reader".into(),
            title: "d is only touched by one thread".into(),
            program_source: src.into(),
            correct_schedule: "main*5,a*4,b".parse().unwrap(),
            tracked_vars: vec!["d".into(), "c".into()],
            choice_count: 2,
            seed: 1,
        };
        let ex = author_exercise(draft).unwrap();
        let report = validate_exercise(&ex);
        let vars: Vec<_> = report
            .issues
            .iter()
            .filter(|i| i.kind == IssueKind::TrackedVariable)
            .map(|i| i.variable.clone().unwrap())
            .collect();
        // d: one writer; c: two writers but never printed
        assert_eq!(vars, ["d", "c"]);
    }

    #[test]
    fn validation_flags_output_and_ordering_items() {
        let mut ex = counter_exercise();
        ex.given_output[0] = "Value for Thread After increment 7".into();
        ex.ordering_items.swap(0, 1);
        let kinds: Vec<_> = validate_exercise(&ex)
            .issues
            .iter()
            .map(|i| i.kind)
            .collect();
        assert!(kinds.contains(&IssueKind::OutputMismatch));
        assert!(kinds.contains(&IssueKind::OrderingItems));
        assert!(kinds.contains(&IssueKind::NoCorrectChoice));
    }

    #[test]
    fn distractors_for_counter() {
        let p = counter_program();
        let r = replay(&p, &race_schedule()).unwrap();
        let d = generate_distractors(&p, &r.trace, &r.output, 3, 42).unwrap();
        assert_eq!(d.len(), 3);
        let distinct: HashSet<_> = d.iter().map(|c| c.lines.clone()).collect();
        assert_eq!(distinct.len(), 3);
        for c in &d {
            assert_ne!(c.lines, golden());
            assert_eq!(judge_lines(&p, &c.lines, &r.output), Ok(false));
        }
        assert_eq!(
            d,
            generate_distractors(&p, &r.trace, &r.output, 3, 42).unwrap()
        );
        assert!(generate_distractors(&p, &r.trace, &r.output, 0, 42)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn distractors_exhausted_for_two_statement_program() {
        let p = crate::parse_program("method main {\n shared c = 0\n c++\n}\n").unwrap();
        let r = replay(&p, &"main*2".parse().unwrap()).unwrap();
        // Exhaustive check: of the 2 permutations exactly one is wrong.
        let lines = render_trace_text(&r.trace);
        let swapped = vec![lines[1].clone(), lines[0].clone()];
        assert_eq!(judge_lines(&p, &lines, &r.output), Ok(true));
        assert_eq!(judge_lines(&p, &swapped, &r.output), Ok(false));
        assert_eq!(
            generate_distractors(&p, &r.trace, &r.output, 3, 42).unwrap_err(),
            DistractorError {
                wanted: 3,
                found: 1
            }
        );
    }

    #[test]
    fn race_timeline() {
        let r = replay(&counter_program(), &race_schedule()).unwrap();
        let sheet = expected_value_timeline(&r, "c").unwrap();
        let mut expected = vec![0i64; 6];
        expected.extend([1, 1]);
        expected.extend([2; 5]);
        expected.extend([1; 8]);
        expected.extend([0; 4]);
        assert_eq!(sheet.rows(), (1..=25).collect::<Vec<_>>());
        assert_eq!(
            sheet.cells.iter().map(|c| c.expected).collect::<Vec<_>>(),
            expected
        );
        assert_eq!(sheet.update_rows, BTreeSet::from([1, 7, 9, 14, 22]));
        let at_prints: Vec<_> = [12, 17, 20, 25]
            .iter()
            .map(|&r| sheet.expected(r).unwrap())
            .collect();
        assert_eq!(at_prints, [2, 1, 1, 0]);
    }

    #[test]
    fn sequential_timeline_checkpoints() {
        let r = replay(&counter_program(), &sequential_schedule()).unwrap();
        let sheet = expected_value_timeline(&r, "c").unwrap();
        let print_rows: Vec<_> = r.prints.iter().map(|p| p.seq).collect();
        let values: Vec<_> = print_rows
            .iter()
            .map(|&row| sheet.expected(row).unwrap())
            .collect();
        assert_eq!(values, [1, 0, 1, 0]);
    }

    #[test]
    fn unmodified_variable_timeline() {
        let src = "method main {\n shared c = 3\n local v = c\n print \"v \" + v\n}\n";
        let p = crate::parse_program(src).unwrap();
        let r = replay(&p, &"main*3".parse().unwrap()).unwrap();
        let sheet = expected_value_timeline(&r, "c").unwrap();
        assert!(sheet.cells.iter().all(|c| c.expected == 3));
        assert_eq!(sheet.update_rows, BTreeSet::from([1]));
        assert_eq!(
            expected_value_timeline(&r, "zz").unwrap_err(),
            ExerciseError::NotInitialized("zz".into())
        );
    }

    #[test]
    fn initialisation_after_first_row() {
        let src = "method main {\n local x = 1\n shared c = 3\n c++\n}\n";
        let p = crate::parse_program(src).unwrap();
        let r = replay(&p, &"main*3".parse().unwrap()).unwrap();
        let sheet = expected_value_timeline(&r, "c").unwrap();
        assert_eq!(
            sheet.cells,
            [
                Cell {
                    row: 2,
                    expected: 3
                },
                Cell {
                    row: 3,
                    expected: 4
                }
            ]
        );
    }

    #[test]
    fn fill_in_grading() {
        let r = replay(&counter_program(), &race_schedule()).unwrap();
        let sheet = expected_value_timeline(&r, "c").unwrap();
        let mut answers: BTreeMap<usize, Option<i64>> = sheet
            .cells
            .iter()
            .map(|c| (c.row, Some(c.expected)))
            .collect();
        let grade = grade_fill_in(&sheet, &answers);
        assert!(grade.all_correct);
        assert_eq!(grade.hint_rows, [1, 7, 9, 14, 22]);

        answers.insert(9, Some(1));
        let grade = grade_fill_in(&sheet, &answers);
        assert!(!grade.all_correct);
        assert_eq!(grade.incorrect_rows(), [9]);
        assert_eq!(grade.verdicts[8].expected, 2);

        answers.insert(10, None);
        assert_eq!(grade_fill_in(&sheet, &answers).incorrect_rows(), [9, 10]);

        let empty = grade_fill_in(&sheet, &BTreeMap::new());
        assert_eq!(empty.incorrect_rows().len(), 25);
        assert!(!empty.all_correct);
    }

    #[test]
    fn json_round_trip_and_schema() {
        let ex = counter_exercise();
        let text = ex.to_json_pretty();
        let back = Exercise::from_json(&text).unwrap();
        assert_eq!(back.to_json_pretty(), text);
        let bumped = text.replace(EXERCISE_SCHEMA, "threadtrace.exercise/v9");
        assert_eq!(
            Exercise::from_json(&bumped).unwrap_err(),
            ExerciseError::Schema("threadtrace.exercise/v9".into())
        );
        assert!(matches!(
            Exercise::from_json("{").unwrap_err(),
            ExerciseError::Json(_)
        ));
    }

    #[test]
    fn authoring_rejects_untracked_init() {
        let draft = ExerciseDraft {
            id: "x".into(),
            title: "x".into(),
            program_source: COUNTER_SOURCE.into(),
            correct_schedule: race_schedule(),
            tracked_vars: vec!["nope".into()],
            choice_count: 4,
            seed: 3,
        };
        assert!(matches!(
            author_exercise(draft).unwrap_err(),
            AuthorError::Exercise(ExerciseError::NotInitialized(_))
        ));
    }
}
