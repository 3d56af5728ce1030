//! The ordering grader checked against text-level oracles that work only
//! from the recorded trace lines, never from the parsed program.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use threadtrace_core::fixtures::{
    counter_exercise, counter_program, sequential_schedule, GOLDEN_TRACE,
};
use threadtrace_core::ordering::{execution_order_violations, retrieval_update_violations};
use threadtrace_core::trace::{parse_trace_text, split_line};
use threadtrace_core::{
    enumerate_schedules, feasible, grade_ordering, render_trace_text, replay, sample_schedule,
    Arrangement,
};

/// Identity of a line as (thread, position in that thread's column of the
/// golden trace), found by matching the k-th copy of a line to the k-th copy in
/// the golden trace.
fn tag(lines: &[String]) -> Vec<(String, usize)> {
    let mut per_thread: HashMap<&str, Vec<&str>> = HashMap::new();
    for l in GOLDEN_TRACE {
        let (t, text) = split_line(l).unwrap();
        per_thread.entry(t).or_default().push(text);
    }
    let mut used: HashMap<(&str, &str), usize> = HashMap::new();
    lines
        .iter()
        .map(|l| {
            let (t, text) = split_line(l).unwrap();
            let k = used.entry((t, text)).or_insert(0);
            let column = &per_thread[t];
            let index = column
                .iter()
                .enumerate()
                .filter(|(_, x)| **x == text)
                .nth(*k)
                .unwrap()
                .0;
            *k += 1;
            (t.to_string(), index)
        })
        .collect()
}

/// The golden trace column positions of the statements that start each thread.
fn starter(thread: &str) -> Option<(String, usize)> {
    match thread {
        "thread-1" => Some(("main".into(), 3)),
        "thread-2" => Some(("main".into(), 4)),
        _ => None,
    }
}

fn oracle_exec_violations(lines: &[String]) -> Vec<usize> {
    let mut placed = HashSet::new();
    let mut out = Vec::new();
    for (i, (t, k)) in tag(lines).into_iter().enumerate() {
        let pre = if k > 0 {
            Some((t.clone(), k - 1))
        } else {
            starter(&t)
        };
        if pre.is_some_and(|p| !placed.contains(&p)) {
            out.push(i + 1);
        }
        placed.insert((t, k));
    }
    out
}

/// Retrievals and updates of `c` in the golden trace, by line text.
fn oracle_ru_sequence() -> Vec<(String, usize)> {
    let all: Vec<String> = GOLDEN_TRACE.iter().map(|s| s.to_string()).collect();
    tag(&all)
        .into_iter()
        .zip(GOLDEN_TRACE)
        .filter(|(_, l)| {
            let (_, text) = split_line(l).unwrap();
            matches!(
                text,
                "Counter counter = new Counter()" | "c++" | "c--" | "return c"
            )
        })
        .map(|(k, _)| k)
        .collect()
}

fn oracle_ru_violations(lines: &[String]) -> Vec<usize> {
    let sequence = oracle_ru_sequence();
    let mut placed = HashSet::new();
    let mut out = Vec::new();
    for (pos, key) in tag(lines).into_iter().enumerate() {
        if let Some(i) = sequence.iter().position(|k| *k == key) {
            if i > 0 && !placed.contains(&sequence[i - 1]) {
                out.push(pos + 1);
            }
            placed.insert(key);
        }
    }
    out
}

fn golden() -> Vec<String> {
    GOLDEN_TRACE.iter().map(|s| s.to_string()).collect()
}

fn is_feasible(lines: &[String]) -> bool {
    let p = counter_program();
    let refs = parse_trace_text(lines, &p).unwrap();
    feasible(&p, refs.iter().map(|r| (r.thread.as_str(), r.statement))).feasible
}

#[test]
fn oracle_sequence_is_the_expected_update_retrieval_pattern() {
    let seq = oracle_ru_sequence();
    assert_eq!(seq.len(), 9);
    assert_eq!(seq[0], ("main".to_string(), 0));
    // two updates before the first retrieval: the race
    assert_eq!(seq[1], ("thread-1".to_string(), 1));
    assert_eq!(seq[2], ("thread-2".to_string(), 1));
    assert_eq!(seq[3], ("thread-1".to_string(), 3));
}

#[test]
fn grader_fixtures() {
    let ex = counter_exercise();
    let identity = grade_ordering(&ex, &Arrangement::new(golden())).unwrap();
    assert_eq!(identity.errors, 0);
    assert_eq!(identity.accuracy, 1.0);

    let mut swapped = golden();
    swapped.swap(5, 6);
    assert_eq!(oracle_exec_violations(&swapped), [6]);
    let r = grade_ordering(&ex, &Arrangement::new(swapped)).unwrap();
    assert_eq!(r.exec_violation_positions, [6]);
    assert_eq!(r.errors, 1);
    assert!((r.accuracy - 24.0 / 25.0).abs() < 1e-12);
}

#[test]
fn sequential_arrangement_against_race_exercise() {
    let ex = counter_exercise();
    let p = counter_program();
    let seq = render_trace_text(&replay(&p, &sequential_schedule()).unwrap().trace);
    let oracle_exec = oracle_exec_violations(&seq);
    let oracle_ru = oracle_ru_violations(&seq);
    assert!(oracle_exec.is_empty());
    // thread-1's first `return c` sits at row 9, before thread-2's `c++`
    assert_eq!(oracle_ru, [9]);
    assert_eq!(seq[8], "[thread-1] return c");

    let a = Arrangement::new(seq);
    assert_eq!(execution_order_violations(&p, &a).unwrap(), oracle_exec);
    assert_eq!(retrieval_update_violations(&ex, &a).unwrap(), oracle_ru);
    let r = grade_ordering(&ex, &a).unwrap();
    assert!(r.exec_violation_positions.is_empty());
    assert_eq!(r.ru_violation_positions, [9]);
    assert_eq!(r.errors, 1);
    assert!((r.accuracy - 0.96).abs() < 1e-12);
}

#[test]
fn grader_matches_text_oracle_on_random_arrangements() {
    let ex = counter_exercise();
    let p = counter_program();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..600 {
        let lines = if i % 2 == 0 {
            let mut l = golden();
            l.shuffle(&mut rng);
            l
        } else {
            let mut l =
                render_trace_text(&replay(&p, &sample_schedule(&p, &mut rng)).unwrap().trace);
            if i % 3 == 0 {
                let j = rng.gen_range(0..24);
                l.swap(j, j + 1);
            }
            l
        };
        let a = Arrangement::new(lines.clone());
        let exec = oracle_exec_violations(&lines);
        assert_eq!(execution_order_violations(&p, &a).unwrap(), exec);
        let report = grade_ordering(&ex, &a).unwrap();
        if exec.is_empty() {
            assert_eq!(report.ru_violation_positions, oracle_ru_violations(&lines));
            assert_eq!(report.errors, report.ru_violation_positions.len());
        } else {
            assert!(report.ru_violation_positions.is_empty());
            assert_eq!(report.errors, exec.len());
        }
        assert!((0.0..=1.0).contains(&report.accuracy));
    }
}

/// Every feasible order of the counter events, keyed by golden positions.
/// A golden column position equals the event's ordinal, which
/// `tagging_matches_replayed_ordinals` confirms.
fn feasible_keys() -> &'static HashSet<Vec<u8>> {
    static KEYS: OnceLock<HashSet<Vec<u8>>> = OnceLock::new();
    KEYS.get_or_init(|| {
        let p = counter_program();
        let index: HashMap<(String, usize), u8> = tag(&golden())
            .into_iter()
            .enumerate()
            .map(|(i, k)| (k, i as u8))
            .collect();
        let by_event: HashMap<(&str, usize), u8> = index
            .iter()
            .map(|((t, k), &i)| ((t.as_str(), *k), i))
            .collect();
        enumerate_schedules(&p, 64)
            .unwrap()
            .map(|r| {
                r.trace
                    .events
                    .iter()
                    .map(|e| by_event[&(&*e.thread, e.ordinal)])
                    .collect()
            })
            .collect()
    })
}

#[test]
fn tagging_matches_replayed_ordinals() {
    let p = counter_program();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let r = replay(&p, &sample_schedule(&p, &mut rng)).unwrap();
        let tags = tag(&render_trace_text(&r.trace));
        for (t, e) in tags.iter().zip(&r.trace.events) {
            assert_eq!((t.0.as_str(), t.1), (&*e.thread, e.ordinal));
        }
    }
}

#[test]
fn zero_violations_iff_feasible_over_random_permutations() {
    let p = counter_program();
    let keys = feasible_keys();
    assert_eq!(keys.len(), 352716);
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut disagreements = 0;
    let mut feasible_seen = 0;
    for i in 0..1000 {
        // half uniform shuffles, half near-feasible orders
        let mut perm: Vec<u8> = (0..25).collect();
        if i % 2 == 0 {
            perm.shuffle(&mut rng);
        } else {
            let lines =
                render_trace_text(&replay(&p, &sample_schedule(&p, &mut rng)).unwrap().trace);
            let index: HashMap<(String, usize), u8> = tag(&golden())
                .into_iter()
                .enumerate()
                .map(|(i, k)| (k, i as u8))
                .collect();
            perm = tag(&lines).into_iter().map(|k| index[&k]).collect();
            if i % 4 == 1 {
                let j = rng.gen_range(0..24);
                perm.swap(j, j + 1);
            }
        }
        let lines: Vec<String> = perm
            .iter()
            .map(|&k| GOLDEN_TRACE[k as usize].to_string())
            .collect();
        let truth = keys.contains(&perm);
        feasible_seen += truth as usize;
        let exec_empty = execution_order_violations(&p, &Arrangement::new(lines.clone()))
            .unwrap()
            .is_empty();
        if exec_empty != is_feasible(&lines) || exec_empty != truth {
            disagreements += 1;
        }
    }
    assert_eq!(disagreements, 0);
    assert!(
        feasible_seen > 100,
        "too few feasible samples: {feasible_seen}"
    );
}

#[test]
fn rejection_sampled_infeasible_permutations_are_rejected() {
    let keys = feasible_keys();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 1000 {
        let mut perm: Vec<u8> = (0..25).collect();
        perm.shuffle(&mut rng);
        if keys.contains(&perm) {
            continue;
        }
        let lines: Vec<String> = perm
            .iter()
            .map(|&k| GOLDEN_TRACE[k as usize].to_string())
            .collect();
        assert!(!is_feasible(&lines));
        checked += 1;
    }
}
