//! Core of the thread-trace tutor: the MiniConc language, deterministic
//! replay and schedule exploration, exercises with distractor traces,
//! ordering grading, and the enhanced trace-table layout.

pub mod exercise;
pub mod explore;
pub mod fixtures;
pub mod layout;
pub mod ordering;
pub mod parse;
pub mod program;
pub mod replay;
pub mod trace;

pub use exercise::{
    author_exercise, expected_value_timeline, generate_distractors, grade_fill_in,
    is_correct_choice, validate_exercise, Exercise, ExerciseDraft, ExerciseError, FillInGrade,
    FillInSheet, ValidationReport,
};
pub use explore::{enumerate_schedules, feasible, sample_schedule, Feasibility};
pub use layout::{layout, replay_init, replay_step, Direction, ReplayState, TableLayout};
pub use ordering::{grade_ordering, Arrangement, GradeReport, RuOrder};
pub use parse::{parse_program, ParseError};
pub use program::{ProgramModel, StatementRef};
pub use replay::{replay, ExecutionResult, ReplayError, Schedule};
pub use trace::{parse_trace_text, project_thread, render_trace_text, Event, EventKey, Trace};
