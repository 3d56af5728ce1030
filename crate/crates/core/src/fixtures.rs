//! The counter program and its recorded race trace, used by tests, the
//! shipped exercise and the acceptance checks.

use crate::exercise::{author_exercise, Exercise, ExerciseDraft};
use crate::parse::parse_program;
use crate::program::ProgramModel;
use crate::replay::Schedule;

pub const COUNTER_SOURCE: &str = include_str!("../fixtures/counter.mc");

/// Trace of the counter program under [`race_schedule`].
pub const GOLDEN_TRACE: [&str; 25] = [
    "[main] Counter counter = new Counter()",
    "[main] Thread t1 = new Thread(counter)",
    "[main] Thread t2 = new Thread(counter)",
    "[main] t1.start()",
    "[main] t2.start()",
    "[thread-1] this.increment()",
    "[thread-1] c++",
    "[thread-2] this.increment()",
    "[thread-2] c++",
    "[thread-1] int value = this.getValue()",
    "[thread-1] return c",
    "[thread-1] System.out.println(\"Value for Thread After increment \" + value)",
    "[thread-1] this.decrement()",
    "[thread-1] c--",
    "[thread-1] value = this.getValue()",
    "[thread-1] return c",
    "[thread-1] System.out.println(\"Value for Thread at last \" + value)",
    "[thread-2] int value = this.getValue()",
    "[thread-2] return c",
    "[thread-2] System.out.println(\"Value for Thread After increment \" + value)",
    "[thread-2] this.decrement()",
    "[thread-2] c--",
    "[thread-2] value = this.getValue()",
    "[thread-2] return c",
    "[thread-2] System.out.println(\"Value for Thread at last \" + value)",
];

pub const COUNTER_EXERCISE_SEED: u64 = 20;

pub fn counter_program() -> ProgramModel {
    parse_program(COUNTER_SOURCE).expect("counter fixture parses")
}

/// Both threads increment before either reads: prints 2, 1, 1, 0.
pub fn race_schedule() -> Schedule {
    "main*5,thread-1*2,thread-2*2,thread-1*8,thread-2*8"
        .parse()
        .expect("valid schedule")
}

/// Thread 1 runs to completion before thread 2: prints 1, 0, 1, 0.
pub fn sequential_schedule() -> Schedule {
    "main*5,thread-1*10,thread-2*10"
        .parse()
        .expect("valid schedule")
}

pub fn counter_exercise() -> Exercise {
    author_exercise(ExerciseDraft {
        id: "counter".to_string(),
        title: "Shared counter".to_string(),
        program_source: COUNTER_SOURCE.to_string(),
        correct_schedule: race_schedule(),
        tracked_vars: vec!["c".to_string()],
        choice_count: crate::exercise::DEFAULT_CHOICES,
        seed: COUNTER_EXERCISE_SEED,
    })
    .expect("counter exercise authors")
}
