//! Deterministic replay of a program under an explicit schedule.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::program::{Expression, ProgramModel, StatementKind, StatementRef};
use crate::trace::{Event, Trace};

/// The global interleaving: which thread executes each step.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule {
    pub steps: Vec<String>,
}

impl Schedule {
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Schedule {
            steps: names.into_iter().map(Into::into).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Compact form `main*5,thread-1*2,thread-2`; `*k` repeats a step.
impl FromStr for Schedule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut steps = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, count) = match part.split_once('*') {
                Some((name, n)) => (
                    name.trim(),
                    n.trim()
                        .parse::<usize>()
                        .map_err(|_| format!("bad repeat count in `{part}`"))?,
                ),
                None => (part, 1),
            };
            if name.is_empty() {
                return Err(format!("empty thread name in `{part}`"));
            }
            steps.extend(std::iter::repeat_n(name.to_string(), count));
        }
        Ok(Schedule { steps })
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut i = 0;
        while i < self.steps.len() {
            let run = self.steps[i..]
                .iter()
                .take_while(|s| **s == self.steps[i])
                .count();
            if !first {
                f.write_str(",")?;
            }
            first = false;
            if run == 1 {
                write!(f, "{}", self.steps[i])?;
            } else {
                write!(f, "{}*{}", self.steps[i], run)?;
            }
            i += run;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum AccessKind {
    Read,
    Write,
}

/// One read or write of a shared variable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Access {
    pub seq: usize,
    pub thread: Arc<str>,
    pub ordinal: usize,
    pub var: String,
    pub kind: AccessKind,
    /// For reads: the value read reaches some print statement.
    pub feeds_output: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PrintRecord {
    pub seq: usize,
    pub text: String,
    /// `seq` of the shared reads whose value is printed.
    pub sources: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelinePoint {
    pub row: usize,
    pub value: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExecutionResult {
    pub trace: Trace,
    pub output: Vec<String>,
    /// Per shared variable, the rows that set it and the value afterwards.
    pub timelines: BTreeMap<String, Vec<TimelinePoint>>,
    pub final_values: BTreeMap<String, i64>,
    pub accesses: Vec<Access>,
    pub prints: Vec<PrintRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("step {step}: unknown thread `{thread}`")]
    UnknownThread { step: usize, thread: String },
    #[error("step {step}: thread `{thread}` has not been started")]
    NotStarted { step: usize, thread: String },
    #[error("step {step}: thread `{thread}` has already finished")]
    Finished { step: usize, thread: String },
    #[error("schedule ends after {steps} steps with {remaining} events still pending")]
    Incomplete { steps: usize, remaining: usize },
}

/// A value together with the shared reads (indices into `accesses`) it was
/// derived from.
#[derive(Clone, Debug)]
struct Value {
    value: i64,
    reads: Vec<usize>,
}

#[derive(Debug)]
struct Frame {
    method: usize,
    pc: usize,
    call_seq: usize,
    locals: Vec<(String, Value)>,
    /// Caller local receiving this frame's return value.
    return_to: Option<String>,
}

impl Frame {
    fn new(method: usize, call_seq: usize, return_to: Option<String>) -> Self {
        Frame {
            method,
            pc: 0,
            call_seq,
            locals: Vec::new(),
            return_to,
        }
    }

    fn local(&self, name: &str) -> &Value {
        &self
            .locals
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .expect("locals are resolved by the parser")
            .1
    }

    fn set_local(&mut self, name: &str, value: Value) {
        match self.locals.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = value,
            None => self.locals.push((name.to_string(), value)),
        }
    }
}

struct ThreadState {
    name: Arc<str>,
    frames: Vec<Frame>,
    started: bool,
    next_ordinal: usize,
}

/// Interpreter state for one execution in progress.
pub(crate) struct Machine<'p> {
    program: &'p ProgramModel,
    threads: Vec<ThreadState>,
    shared: BTreeMap<String, i64>,
    events: Vec<Event>,
    accesses: Vec<Access>,
    prints: Vec<PrintRecord>,
    timelines: BTreeMap<String, Vec<TimelinePoint>>,
    steps: Vec<String>,
}

pub(crate) enum StepError {
    NotStarted,
    Finished,
}

impl<'p> Machine<'p> {
    pub(crate) fn new(program: &'p ProgramModel) -> Self {
        let threads = (0..program.thread_count())
            .map(|t| ThreadState {
                name: Arc::from(program.thread_name(t)),
                frames: Vec::new(),
                started: false,
                next_ordinal: 0,
            })
            .collect();
        let mut m = Machine {
            program,
            threads,
            shared: BTreeMap::new(),
            events: Vec::with_capacity(program.event_count()),
            accesses: Vec::new(),
            prints: Vec::new(),
            timelines: BTreeMap::new(),
            steps: Vec::with_capacity(program.event_count()),
        };
        m.start_thread(0);
        m
    }

    fn start_thread(&mut self, t: usize) {
        let entry = self.program.entry_method(t);
        let th = &mut self.threads[t];
        th.started = true;
        th.frames.push(Frame::new(entry, 0, None));
        self.unwind(t);
    }

    /// Pops frames whose bodies are exhausted.
    fn unwind(&mut self, t: usize) {
        let program = self.program;
        let frames = &mut self.threads[t].frames;
        while let Some(top) = frames.last() {
            if top.pc < program.methods[top.method].body.len() {
                break;
            }
            frames.pop();
        }
    }

    pub(crate) fn is_done(&self) -> bool {
        self.threads
            .iter()
            .all(|t| t.started && t.frames.is_empty())
    }

    fn read_shared(&mut self, t: usize, var: &str) -> Value {
        let value = self.shared[var];
        self.accesses.push(Access {
            seq: self.events.len(),
            thread: self.threads[t].name.clone(),
            ordinal: self.threads[t].next_ordinal - 1,
            var: var.to_string(),
            kind: AccessKind::Read,
            feeds_output: false,
        });
        Value {
            value,
            reads: vec![self.accesses.len() - 1],
        }
    }

    fn write_shared(&mut self, t: usize, var: &str, value: i64) {
        let seq = self.events.len();
        self.shared.insert(var.to_string(), value);
        self.timelines
            .entry(var.to_string())
            .or_default()
            .push(TimelinePoint { row: seq, value });
        self.accesses.push(Access {
            seq,
            thread: self.threads[t].name.clone(),
            ordinal: self.threads[t].next_ordinal - 1,
            var: var.to_string(),
            kind: AccessKind::Write,
            feeds_output: false,
        });
    }

    fn eval(&mut self, t: usize, expr: &Expression) -> Value {
        match expr {
            Expression::IntLiteral(v) => Value {
                value: *v,
                reads: Vec::new(),
            },
            Expression::LocalRef(name) => {
                self.threads[t].frames.last().unwrap().local(name).clone()
            }
            Expression::SharedRef(var) => self.read_shared(t, var),
            Expression::Concat(..) => unreachable!("concat only appears in print"),
        }
    }

    /// Executes the next statement of thread `t`.
    pub(crate) fn step(&mut self, t: usize) -> Result<(), StepError> {
        let program = self.program;
        let th = &mut self.threads[t];
        if !th.started {
            return Err(StepError::NotStarted);
        }
        let depth = th.frames.len().checked_sub(1).ok_or(StepError::Finished)?;
        let frame = th.frames.last_mut().unwrap();
        let statement = StatementRef {
            method: frame.method,
            index: frame.pc,
        };
        frame.pc += 1;
        let parent_seq = frame.call_seq;
        let ordinal = th.next_ordinal;
        th.next_ordinal += 1;
        let stmt = program.statement(statement);
        let seq = self.events.len() + 1;
        self.events.push(Event {
            seq,
            thread: th.name.clone(),
            ordinal,
            statement,
            depth,
            parent_seq,
            display: stmt.display.clone(),
            source_line: stmt.line,
        });
        self.steps.push(th.name.to_string());

        match &stmt.kind {
            StatementKind::SharedInit { vars } => {
                for (var, init) in vars {
                    self.write_shared(t, var, *init);
                }
            }
            StatementKind::ThreadDecl { .. } => {}
            StatementKind::SpawnStart { thread } => {
                let target = program.thread_index(thread).expect("validated thread");
                self.start_thread(target);
            }
            StatementKind::LocalDecl { local, expr }
            | StatementKind::AssignLocal { local, expr } => {
                let v = self.eval(t, expr);
                self.threads[t]
                    .frames
                    .last_mut()
                    .unwrap()
                    .set_local(local, v);
            }
            StatementKind::IncShared { var } => {
                let v = self.shared[var] + 1;
                self.write_shared(t, var, v);
            }
            StatementKind::DecShared { var } => {
                let v = self.shared[var] - 1;
                self.write_shared(t, var, v);
            }
            StatementKind::CallVoid { callee } => {
                self.threads[t].frames.push(Frame::new(*callee, seq, None));
            }
            StatementKind::CallAssign { local, callee, .. } => {
                self.threads[t]
                    .frames
                    .push(Frame::new(*callee, seq, Some(local.clone())));
            }
            StatementKind::Print { expr } => {
                let Expression::Concat(text, local) = expr else {
                    unreachable!("print takes a concatenation")
                };
                let v = self.threads[t].frames.last().unwrap().local(local).clone();
                for &r in &v.reads {
                    self.accesses[r].feeds_output = true;
                }
                self.prints.push(PrintRecord {
                    seq,
                    text: format!("{text}{}", v.value),
                    sources: v.reads.iter().map(|&r| self.accesses[r].seq).collect(),
                });
            }
            StatementKind::ReturnExpr { expr } => {
                let v = self.eval(t, expr);
                let frames = &mut self.threads[t].frames;
                let done = frames.pop().unwrap();
                if let (Some(local), Some(caller)) = (done.return_to, frames.last_mut()) {
                    caller.set_local(&local, v);
                }
            }
        }
        self.unwind(t);
        Ok(())
    }

    pub(crate) fn finish(self) -> ExecutionResult {
        let program = self.program;
        let mut columns: Vec<usize> = (1..program.thread_count()).collect();
        columns.sort_by_key(|&t| program.spawn_ordinal(t));
        let columns: Vec<usize> = std::iter::once(0).chain(columns).collect();
        let threads = columns
            .iter()
            .map(|&t| program.thread_name(t).to_string())
            .collect();
        let root_methods = columns
            .iter()
            .map(|&t| program.methods[program.entry_method(t)].name.clone())
            .collect();
        ExecutionResult {
            trace: Trace {
                program: program.name.clone(),
                threads,
                root_methods,
                events: self.events,
                schedule: Schedule { steps: self.steps },
            },
            output: self.prints.iter().map(|p| p.text.clone()).collect(),
            timelines: self.timelines,
            final_values: self.shared,
            accesses: self.accesses,
            prints: self.prints,
        }
    }
}

/// Replays `program` under a schedule of thread indices (0 = main).
pub(crate) fn replay_indices(
    program: &ProgramModel,
    steps: &[usize],
) -> Result<ExecutionResult, ReplayError> {
    let mut m = Machine::new(program);
    for (i, &t) in steps.iter().enumerate() {
        m.step(t).map_err(|e| {
            let thread = program.thread_name(t).to_string();
            match e {
                StepError::NotStarted => ReplayError::NotStarted {
                    step: i + 1,
                    thread,
                },
                StepError::Finished => ReplayError::Finished {
                    step: i + 1,
                    thread,
                },
            }
        })?;
    }
    if !m.is_done() {
        return Err(ReplayError::Incomplete {
            steps: steps.len(),
            remaining: program.event_count().saturating_sub(steps.len()),
        });
    }
    Ok(m.finish())
}

/// Replays `program` step by step under `schedule`.
pub fn replay(program: &ProgramModel, schedule: &Schedule) -> Result<ExecutionResult, ReplayError> {
    let steps = schedule
        .steps
        .iter()
        .enumerate()
        .map(|(i, name)| {
            program
                .thread_index(name)
                .ok_or_else(|| ReplayError::UnknownThread {
                    step: i + 1,
                    thread: name.clone(),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    replay_indices(program, &steps)
}
