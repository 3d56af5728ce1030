//! Exhaustive and sampled exploration of a program's interleavings, and the
//! feasibility check for a proposed event order.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::program::{ProgramModel, StatementRef};
use crate::replay::{replay_indices, ExecutionResult, Schedule};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("program executes {events} events, more than the bound of {max}")]
pub struct TooManyEvents {
    pub events: usize,
    pub max: usize,
}

/// Cheap scheduling state: how far each thread has progressed.
#[derive(Clone, Debug)]
struct Progress<'p> {
    program: &'p ProgramModel,
    next: Vec<usize>,
    started: Vec<bool>,
}

impl<'p> Progress<'p> {
    fn new(program: &'p ProgramModel) -> Self {
        let mut started = vec![false; program.thread_count()];
        started[0] = true;
        Progress {
            program,
            next: vec![0; program.thread_count()],
            started,
        }
    }

    fn runnable(&self, t: usize) -> bool {
        self.started[t] && self.next[t] < self.program.program_order(t).len()
    }

    fn runnable_threads(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.next.len()).filter(|&t| self.runnable(t))
    }

    fn apply(&mut self, t: usize) {
        if t == 0 {
            if let Some(spawned) = self.program.spawned_by(self.next[0]) {
                self.started[spawned] = true;
            }
        }
        self.next[t] += 1;
    }

    fn undo(&mut self, t: usize) {
        self.next[t] -= 1;
        if t == 0 {
            if let Some(spawned) = self.program.spawned_by(self.next[0]) {
                self.started[spawned] = false;
            }
        }
    }
}

/// Depth-first walk over every feasible schedule, as thread indices, in
/// lexicographic order of thread index (main = 0, then declaration order).
pub struct ScheduleIter<'p> {
    progress: Progress<'p>,
    path: Vec<usize>,
    total: usize,
    fresh: bool,
}

impl<'p> ScheduleIter<'p> {
    pub fn new(program: &'p ProgramModel) -> Self {
        ScheduleIter {
            progress: Progress::new(program),
            path: Vec::with_capacity(program.event_count()),
            total: program.event_count(),
            fresh: true,
        }
    }

    fn descend(&mut self) {
        while self.path.len() < self.total {
            let t = self
                .progress
                .runnable_threads()
                .next()
                .expect("threads never block, so some thread is runnable");
            self.progress.apply(t);
            self.path.push(t);
        }
    }
}

impl Iterator for ScheduleIter<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.fresh {
            self.fresh = false;
            self.descend();
            return Some(self.path.clone());
        }
        while let Some(t) = self.path.pop() {
            self.progress.undo(t);
            let alternative = self.progress.runnable_threads().find(|&u| u > t);
            if let Some(u) = alternative {
                self.progress.apply(u);
                self.path.push(u);
                self.descend();
                return Some(self.path.clone());
            }
        }
        None
    }
}

/// Iterates over every feasible schedule of `program`, replaying each one.
pub fn enumerate_schedules(
    program: &ProgramModel,
    max_events: usize,
) -> Result<impl Iterator<Item = ExecutionResult> + '_, TooManyEvents> {
    let events = program.event_count();
    if events > max_events {
        return Err(TooManyEvents {
            events,
            max: max_events,
        });
    }
    Ok(ScheduleIter::new(program).map(move |steps| {
        replay_indices(program, &steps).expect("enumerated schedules are feasible")
    }))
}

pub(crate) fn to_schedule(program: &ProgramModel, steps: &[usize]) -> Schedule {
    Schedule::from_names(steps.iter().map(|&t| program.thread_name(t)))
}

/// Draws a feasible schedule by picking uniformly among runnable threads at
/// every step.
pub fn sample_schedule<R: Rng + ?Sized>(program: &ProgramModel, rng: &mut R) -> Schedule {
    let mut progress = Progress::new(program);
    let mut steps = Vec::with_capacity(program.event_count());
    let mut candidates = Vec::new();
    for _ in 0..program.event_count() {
        candidates.clear();
        candidates.extend(progress.runnable_threads());
        let t = candidates[rng.gen_range(0..candidates.len())];
        progress.apply(t);
        steps.push(t);
    }
    to_schedule(program, &steps)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Feasibility {
    pub feasible: bool,
    /// 1-based position of the first event that breaks feasibility.
    pub first_violation: Option<usize>,
}

/// Checks an order of `(thread, statement)` events against program order and
/// spawn-before-first-event.
///
/// The input is expected to be a permutation of one complete execution's
/// events; an order that stops short is reported infeasible at `len + 1`.
pub fn feasible<'a, I>(program: &ProgramModel, order: I) -> Feasibility
where
    I: IntoIterator<Item = (&'a str, StatementRef)>,
{
    let mut next = vec![0usize; program.thread_count()];
    let mut position = 0;
    let violation = |p| Feasibility {
        feasible: false,
        first_violation: Some(p),
    };
    for (thread, statement) in order {
        position += 1;
        let Some(t) = program.thread_index(thread) else {
            return violation(position);
        };
        let expected = program.program_order(t).get(next[t]).map(|e| e.statement);
        if expected != Some(statement) {
            return violation(position);
        }
        if t != 0 && next[t] == 0 {
            let spawn = program
                .spawn_ordinal(t)
                .expect("declared threads are started");
            if next[0] <= spawn {
                return violation(position);
            }
        }
        next[t] += 1;
    }
    let complete = (0..program.thread_count()).all(|t| next[t] == program.program_order(t).len());
    if complete {
        Feasibility {
            feasible: true,
            first_violation: None,
        }
    } else {
        violation(position + 1)
    }
}
