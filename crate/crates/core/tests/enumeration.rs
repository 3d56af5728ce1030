use std::collections::BTreeSet;
use std::time::Instant;

use threadtrace_core::fixtures::{counter_program, race_schedule, sequential_schedule};
use threadtrace_core::{enumerate_schedules, feasible, parse_program, replay};

/// Binomial coefficient from Pascal's triangle.
fn choose(n: usize, k: usize) -> u64 {
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = vec![1u64; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    row[k]
}

#[test]
fn pascal_oracle_sanity() {
    assert_eq!(choose(4, 2), 6);
    assert_eq!(choose(21, 11), 352716);
}

#[test]
fn counter_enumeration_matches_interleaving_count() {
    let p = counter_program();
    // The first four main events are forced. The remaining 21 events are
    // `start thread-2`, ten of thread-1 and ten of thread-2, with the start
    // ahead of every thread-2 event. That holds in 1/11 of the
    // 21!/(10! 10!) unconstrained orders, which equals C(21, 11).
    let started = Instant::now();
    let mut count = 0u64;
    let mut outputs = BTreeSet::new();
    for r in enumerate_schedules(&p, 64).unwrap() {
        count += 1;
        let order = r.trace.events.iter().map(|e| (&*e.thread, e.statement));
        assert!(feasible(&p, order).feasible);
        assert_eq!(r.final_values["c"], 0);
        outputs.insert(r.output);
    }
    eprintln!("enumerated {count} schedules in {:?}", started.elapsed());
    assert_eq!(count, choose(21, 11));
    let race = replay(&p, &race_schedule()).unwrap().output;
    let seq = replay(&p, &sequential_schedule()).unwrap().output;
    assert!(outputs.contains(&race));
    assert!(outputs.contains(&seq));
}

#[test]
fn single_thread_has_one_schedule() {
    let p = parse_program("method main {\n shared c = 0\n c++\n c++\n local x = c\n}\n").unwrap();
    assert_eq!(enumerate_schedules(&p, 10).unwrap().count(), 1);
}

#[test]
fn two_independent_threads_count() {
    let src = "\
method main {
    shared c = 0
    thread a runs w
    thread b runs w
    start a
    start b
}
method w {
    c++
    c++
    c--
}
";
    let p = parse_program(src).unwrap();
    // After `start a`: one main event, three of a, three of b, and b
    // may only run once main is done. Counted by explicit walk.
    let mut orders = Vec::new();
    fn walk(prefix: &mut Vec<char>, left: (usize, usize, usize), out: &mut Vec<String>) {
        if left == (0, 0, 0) {
            out.push(prefix.iter().collect());
            return;
        }
        let (m, a, b) = left;
        if m > 0 {
            prefix.push('m');
            walk(prefix, (m - 1, a, b), out);
            prefix.pop();
        }
        if a > 0 {
            prefix.push('a');
            walk(prefix, (m, a - 1, b), out);
            prefix.pop();
        }
        if b > 0 && m == 0 {
            prefix.push('b');
            walk(prefix, (m, a, b - 1), out);
            prefix.pop();
        }
    }
    walk(&mut Vec::new(), (1, 3, 3), &mut orders);
    assert!(orders.iter().all(|o| o.len() == 7));
    assert_eq!(enumerate_schedules(&p, 20).unwrap().count(), orders.len());
}

#[test]
fn bound_exceeded_is_an_error() {
    let p = counter_program();
    assert!(enumerate_schedules(&p, 24).is_err());
}
