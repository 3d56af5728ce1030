use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use threadtrace_core::exercise::expected_value_timeline;
use threadtrace_core::fixtures::counter_program;
use threadtrace_core::layout::{replay_at, replay_step, Direction};
use threadtrace_core::trace::parse_trace_text;
use threadtrace_core::{
    grade_fill_in, layout, project_thread, render_trace_text, replay, sample_schedule,
    ExecutionResult, ProgramModel,
};

fn sampled(p: &ProgramModel, seed: u64) -> ExecutionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = sample_schedule(p, &mut rng);
    replay(p, &s).unwrap()
}

fn printed_integer(line: &str) -> i64 {
    line.rsplit(' ').next().unwrap().parse().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn replay_is_deterministic(seed in any::<u64>()) {
        let p = counter_program();
        let a = sampled(&p, seed);
        let b = replay(&p, &a.trace.schedule).unwrap();
        prop_assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn trace_text_round_trips(seed in any::<u64>()) {
        let p = counter_program();
        let r = sampled(&p, seed);
        let refs = parse_trace_text(&render_trace_text(&r.trace), &p).unwrap();
        prop_assert_eq!(refs.len(), r.trace.len());
        for (x, e) in refs.iter().zip(&r.trace.events) {
            prop_assert_eq!(x.thread.as_str(), &*e.thread);
            prop_assert_eq!(x.statement, e.statement);
        }
    }

    #[test]
    fn projections_partition_and_follow_program_order(seed in any::<u64>()) {
        let p = counter_program();
        let r = sampled(&p, seed);
        let mut seen = vec![false; r.trace.len()];
        for (t, name) in p.thread_names().into_iter().enumerate() {
            let events = project_thread(&r.trace, name).unwrap();
            let statements: Vec<_> = events.iter().map(|e| e.statement).collect();
            let order: Vec<_> = p.program_order(t).iter().map(|s| s.statement).collect();
            prop_assert_eq!(statements, order);
            for e in events {
                prop_assert!(!seen[e.seq - 1]);
                seen[e.seq - 1] = true;
            }
        }
        prop_assert!(seen.into_iter().all(|s| s));
        prop_assert_eq!(r.trace.len(), r.trace.schedule.len());
        prop_assert_eq!(r.trace.len(), p.event_count());
    }

    #[test]
    fn parent_chains_terminate(seed in any::<u64>()) {
        let p = counter_program();
        let r = sampled(&p, seed);
        for (i, e) in r.trace.events.iter().enumerate() {
            prop_assert_eq!(e.seq, i + 1);
            let mut hops = 0;
            let mut at = e;
            while at.parent_seq != 0 {
                let parent = r.trace.event(at.parent_seq).unwrap();
                prop_assert!(parent.seq < at.seq);
                prop_assert_eq!(&parent.thread, &at.thread);
                prop_assert_eq!(parent.depth + 1, at.depth);
                at = parent;
                hops += 1;
            }
            prop_assert!(hops <= e.depth + 1);
        }
    }

    #[test]
    fn counter_is_conserved(seed in any::<u64>()) {
        let r = sampled(&counter_program(), seed);
        prop_assert_eq!(r.final_values["c"], 0);
    }

    #[test]
    fn timeline_agrees_with_printed_retrievals(seed in any::<u64>()) {
        let r = sampled(&counter_program(), seed);
        let sheet = expected_value_timeline(&r, "c").unwrap();
        prop_assert_eq!(r.prints.len(), 4);
        for print in &r.prints {
            prop_assert_eq!(print.sources.len(), 1);
            let retrieval_row = print.sources[0];
            prop_assert_eq!(sheet.expected(retrieval_row), Some(printed_integer(&print.text)));
        }
        prop_assert_eq!(sheet.cells.last().unwrap().expected, 0);
    }

    #[test]
    fn sheet_as_answers_is_all_correct(seed in any::<u64>()) {
        let r = sampled(&counter_program(), seed);
        let sheet = expected_value_timeline(&r, "c").unwrap();
        let answers: BTreeMap<usize, Option<i64>> =
            sheet.cells.iter().map(|c| (c.row, Some(c.expected))).collect();
        let grade = grade_fill_in(&sheet, &answers);
        prop_assert!(grade.all_correct);
        prop_assert!(grade.incorrect_rows().is_empty());
        prop_assert_eq!(grade.hint_rows.len(), sheet.update_rows.len());
    }

    #[test]
    fn layout_invariants(seed in any::<u64>()) {
        let r = sampled(&counter_program(), seed);
        let l = layout(&r.trace);
        let n = r.trace.len();
        prop_assert_eq!(l.row_count, n);
        // row bijection
        for row in 1..=n {
            let starting: Vec<_> = l.boxes.iter().filter(|b| !b.synthetic && b.start_row == row).collect();
            prop_assert_eq!(starting.len(), 1);
            prop_assert_eq!(starting[0].event_seq, Some(row));
        }
        // containment
        for e in &r.trace.events {
            let child = l.event_box(e.seq).unwrap();
            let parent = if e.parent_seq == 0 {
                l.root(&e.thread).unwrap()
            } else {
                l.event_box(e.parent_seq).unwrap()
            };
            prop_assert!(parent.start_row <= child.start_row && child.end_row <= parent.end_row);
            prop_assert_eq!(parent.depth + 1, child.depth);
        }
        // same thread, same depth: no overlap
        let mut groups: BTreeMap<(&str, usize), Vec<(usize, usize)>> = BTreeMap::new();
        for b in &l.boxes {
            prop_assert!(b.start_row <= b.end_row);
            groups.entry((b.thread.as_str(), b.depth)).or_default().push((b.start_row, b.end_row));
        }
        for spans in groups.values_mut() {
            spans.sort();
            for w in spans.windows(2) {
                prop_assert!(w[0].1 < w[1].0);
            }
        }
        // colour injectivity
        let mut colours: BTreeMap<&str, usize> = BTreeMap::new();
        for b in &l.boxes {
            let c = *colours.entry(b.thread.as_str()).or_insert(b.color_index);
            prop_assert_eq!(c, b.color_index);
        }
        let mut distinct: Vec<_> = colours.values().collect();
        distinct.sort();
        distinct.dedup();
        prop_assert_eq!(distinct.len(), colours.len());
    }

    #[test]
    fn replay_cursor_is_saturating_arithmetic(
        seed in any::<u64>(),
        start in 1usize..=25,
        moves in proptest::collection::vec(any::<bool>(), 0..60),
    ) {
        let r = sampled(&counter_program(), seed);
        let n = r.trace.len() as i64;
        let mut state = replay_at(&r.trace, start).unwrap();
        let mut model = start as i64;
        for forward in moves {
            let dir = if forward { Direction::Forward } else { Direction::Backward };
            state = replay_step(state, dir, &r.trace);
            model = (model + if forward { 1 } else { -1 }).clamp(1, n);
            prop_assert_eq!(state.cursor as i64, model);
            prop_assert_eq!(state.highlighted_trace_row, state.cursor);
            prop_assert_eq!(state.highlighted_source_line, r.trace.events[state.cursor - 1].source_line);
        }
    }

    #[test]
    fn forward_then_backward_is_identity_inside(seed in any::<u64>(), cursor in 1usize..25) {
        let r = sampled(&counter_program(), seed);
        let s = replay_at(&r.trace, cursor).unwrap();
        let there = replay_step(s, Direction::Forward, &r.trace);
        prop_assert_eq!(replay_step(there, Direction::Backward, &r.trace), s);
        if cursor > 1 {
            let back = replay_step(s, Direction::Backward, &r.trace);
            prop_assert_eq!(replay_step(back, Direction::Forward, &r.trace), s);
        }
    }
}

#[test]
fn replay_saturates_at_both_ends() {
    let r = sampled(&counter_program(), 7);
    let first = replay_at(&r.trace, 1).unwrap();
    let last = replay_at(&r.trace, 25).unwrap();
    assert_eq!(replay_step(first, Direction::Backward, &r.trace), first);
    assert_eq!(replay_step(last, Direction::Forward, &r.trace), last);
}
