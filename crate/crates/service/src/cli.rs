//! The `threadtrace` command line: exercise validation, schedule
//! enumeration, ordering grading, authoring and the HTTP server.
//!
//! Reports go to standard output as JSON; diagnostics go to standard error.
//! Exit status is 0 on success, 1 when the check itself fails (an invalid
//! exercise, an ungradable arrangement) and 2 when input cannot be read.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use threadtrace_core::{
    author_exercise, enumerate_schedules, grade_ordering, validate_exercise, Arrangement,
    ExerciseDraft, Schedule,
};

use crate::api::Service;
use crate::log::{AttemptLog, SystemClock};
use crate::store::{read_exercise, ExerciseStore};

#[derive(Debug, Parser)]
#[command(
    name = "threadtrace",
    version,
    about = "Thread-trace exercises: checking, grading and serving"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check an exercise file's invariants, including that exactly one
    /// choice is correct.
    Validate { exercise: PathBuf },
    /// Replay every feasible schedule of the exercise's program and report
    /// the count and the distinct outputs.
    Enumerate {
        exercise: PathBuf,
        #[arg(long, default_value_t = 64)]
        max_events: usize,
    },
    /// Grade an arrangement (one trace line per line of the file).
    GradeOrdering {
        exercise: PathBuf,
        arrangement: PathBuf,
    },
    /// Build an exercise file from a program and its correct schedule.
    Author {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long)]
        title: String,
        /// Compact schedule, e.g. `main*5,thread-1*2,thread-2*2`.
        #[arg(long)]
        schedule: String,
        /// Tracked shared variable (repeatable).
        #[arg(long = "track", required = true)]
        tracked: Vec<String>,
        #[arg(long, default_value_t = threadtrace_core::exercise::DEFAULT_CHOICES)]
        choices: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        /// Seed for the shuffled presentation of ordering items.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_INPUT: u8 = 2;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.to_string(),
        }
    }

    fn check(message: impl ToString) -> Self {
        Failure {
            code: EXIT_CHECK_FAILED,
            message: message.to_string(),
        }
    }
}

fn print_json<T: Serialize>(value: &T) {
    let text = serde_json::to_string_pretty(value).expect("reports serialise");
    // a closed pipe (e.g. `| head`) is not worth a panic
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OutputClass {
    pub output: Vec<String>,
    pub schedules: u64,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EnumerationReport {
    pub exercise_id: String,
    pub events: usize,
    pub schedules: u64,
    pub given_output_schedules: u64,
    pub distinct_outputs: Vec<OutputClass>,
    pub elapsed_seconds: f64,
}

pub fn enumerate_report(
    exercise: &threadtrace_core::Exercise,
    max_events: usize,
) -> Result<EnumerationReport, Failure> {
    let program = exercise.program().map_err(Failure::input)?;
    let started = Instant::now();
    let mut classes: BTreeMap<Vec<String>, u64> = BTreeMap::new();
    let mut schedules = 0u64;
    for r in enumerate_schedules(program, max_events).map_err(Failure::check)? {
        schedules += 1;
        *classes.entry(r.output).or_insert(0) += 1;
    }
    Ok(EnumerationReport {
        exercise_id: exercise.id.clone(),
        events: program.event_count(),
        schedules,
        given_output_schedules: classes.get(&exercise.given_output).copied().unwrap_or(0),
        distinct_outputs: classes
            .into_iter()
            .map(|(output, schedules)| OutputClass { output, schedules })
            .collect(),
        elapsed_seconds: started.elapsed().as_secs_f64(),
    })
}

fn read_lines(path: &Path) -> Result<Vec<String>, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { exercise } => {
            let ex = read_exercise(&exercise).map_err(Failure::input)?;
            let report = validate_exercise(&ex);
            print_json(&report);
            if report.valid {
                Ok(())
            } else {
                Err(Failure::check(format!(
                    "{}: {} issue(s)",
                    exercise.display(),
                    report.issues.len()
                )))
            }
        }
        Command::Enumerate {
            exercise,
            max_events,
        } => {
            let ex = read_exercise(&exercise).map_err(Failure::input)?;
            print_json(&enumerate_report(&ex, max_events)?);
            Ok(())
        }
        Command::GradeOrdering {
            exercise,
            arrangement,
        } => {
            let ex = read_exercise(&exercise).map_err(Failure::input)?;
            let lines = read_lines(&arrangement)?;
            let report = grade_ordering(&ex, &Arrangement::new(lines)).map_err(Failure::check)?;
            print_json(&report);
            Ok(())
        }
        Command::Author {
            program,
            id,
            title,
            schedule,
            tracked,
            choices,
            seed,
            out,
        } => {
            let source = fs::read_to_string(&program)
                .map_err(|e| Failure::input(format!("{}: {e}", program.display())))?;
            let correct_schedule: Schedule = schedule.parse().map_err(Failure::input)?;
            let ex = author_exercise(ExerciseDraft {
                id,
                title,
                program_source: source,
                correct_schedule,
                tracked_vars: tracked,
                choice_count: choices,
                seed,
            })
            .map_err(Failure::check)?;
            let report = validate_exercise(&ex);
            if !report.valid {
                print_json(&report);
                return Err(Failure::check("authored exercise does not validate"));
            }
            let mut json = ex.to_json_pretty();
            json.push('\n');
            match out {
                Some(path) => fs::write(&path, json)
                    .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?,
                None => {
                    let _ = std::io::stdout().lock().write_all(json.as_bytes());
                }
            }
            Ok(())
        }
        Command::Serve {
            port,
            host,
            data_dir,
            seed,
        } => serve(&host, port, &data_dir, seed),
    }
}

fn serve(host: &str, port: u16, data_dir: &Path, seed: u64) -> Result<(), Failure> {
    let store = ExerciseStore::load(data_dir).map_err(Failure::input)?;
    fs::create_dir_all(data_dir)
        .map_err(|e| Failure::input(format!("{}: {e}", data_dir.display())))?;
    let log = AttemptLog::open(data_dir).map_err(Failure::input)?;
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| Failure::input(format!("bad address {host}:{port}: {e}")))?;
    tracing::info!(exercises = store.len(), %addr, data_dir = %data_dir.display(), "starting");
    let service = Arc::new(Service::new(store, log, Arc::new(SystemClock), seed));
    let runtime = tokio::runtime::Runtime::new().map_err(Failure::input)?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Failure::input(format!("bind {addr}: {e}")))?;
        axum::serve(listener, crate::http::router(service))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(Failure::input)
    })
}
