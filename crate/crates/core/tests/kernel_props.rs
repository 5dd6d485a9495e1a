//! Properties of the discretised flow semantics, checked against closed
//! forms computed in the shared test module, plus determinism and delayed-read checks.

mod common;

use std::collections::BTreeMap;

use hsj_core::corpus::{golden_cases, PROGRAMS};
use hsj_core::kernel::{InputAssignment, Kernel, ReadKind, Schedule, TickState};
use hsj_core::rewrite::RewriteConfig;
use hsj_core::syntax::{parse, parse_with_params, Program, Stmt};
use hsj_core::{Rational, Value};
use proptest::prelude::*;

use common::{check_equivalence, check_flow_case, flow_case, rational, WCRTS};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn discretised_flow_lemmas(case in flow_case()) {
        check_flow_case(&case)?;
    }
}

#[test]
fn corpus_native_flows_match_rewrite() {
    for case in golden_cases() {
        check_equivalence(case.source(), &case.params, case.wcrt.clone(), &case.schedule, case.max_ticks)
            .unwrap_or_else(|e| panic!("{}: {e}", case.id));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn random_native_flows_match_rewrite(
        src in common::program(),
        schedule in common::schedule(24),
        (wn, wd) in prop::sample::select(WCRTS.to_vec()),
    ) {
        check_equivalence(&src, &BTreeMap::new(), Rational::new(wn, wd), &schedule, 24)?;
    }

    #[test]
    fn combine_is_independent_of_branch_order(
        writes in proptest::collection::vec(rational(-6, 6), 2..6),
        shift in 0usize..6,
        times in any::<bool>(),
    ) {
        // `op*` is only legal on valued signals, `op+` is used on a
        // continuous variable
        let (decl, write) = if times { ("ratio signal x op* = 1", "?x = ") } else { ("cont x op+ = 1", "x = ") };
        let build = |ws: &[Rational]| {
            let branches: Vec<String> = (0..ws.len()).map(|i| format!("{{{write}w{i}; pause}}")).collect();
            let params: Vec<String> = (0..ws.len()).map(|i| format!("w{i}")).collect();
            format!("param {};\n{decl};\n{}", params.join(", "), branches.join(" || "))
        };
        let bind = |ws: &[Rational]| -> BTreeMap<String, Rational> {
            ws.iter().enumerate().map(|(i, w)| (format!("w{i}"), w.clone())).collect()
        };
        let mut rotated = writes.clone();
        rotated.rotate_left(shift % writes.len());
        let mut reversed = writes.clone();
        reversed.reverse();
        let cfg = RewriteConfig::new(Rational::one()).unwrap();
        let expected = writes.iter().skip(1).fold(writes[0].clone(), |acc, w| if times { &acc * w } else { &acc + w });
        for ws in [&writes, &rotated, &reversed] {
            // names are bound to the permuted values so the branch order
            // differs while the multiset of writes is the same
            let program = parse_with_params(&build(ws), &bind(ws)).unwrap();
            let trace = Kernel::new(&program, &cfg).unwrap().run(&Schedule::empty(), 4).unwrap();
            let got = if times {
                trace.value("x", 1).and_then(|v| v.as_num()).cloned()
            } else {
                trace.cont("x", 1).cloned()
            };
            prop_assert_eq!(got, Some(expected.clone()));
        }
    }

    #[test]
    fn reads_see_the_previous_settled_state(src in common::program(), schedule in common::schedule(16)) {
        let program = parse(&src).unwrap();
        check_delayed_reads(&program, &schedule, 16);
    }
}

/// True when some declaration can be entered again by a loop; a read in
/// the tick of re-entry sees the freshly reset slot.
fn has_reentrant_decls(program: &Program) -> bool {
    let mut found = false;
    program.root.visit(&mut |s| {
        if let Stmt::Loop(body) = s {
            body.visit(&mut |t| found |= matches!(t, Stmt::Signal(_) | Stmt::Cont(_)));
        }
    });
    found
}

fn check_delayed_reads(program: &Program, schedule: &Schedule, ticks: u64) {
    let kernel = Kernel::new(program, &RewriteConfig::new(Rational::from(2)).unwrap()).unwrap();
    let mut state: TickState = kernel.init();
    let absent = InputAssignment::absent();
    while state.tick < ticks && !state.is_terminated() {
        let inputs = schedule.at(state.tick + 1).unwrap_or(&absent);
        let Ok(step) = kernel.tick_logged(&state, inputs) else { return };
        for read in &step.reads {
            let prev = &state.slots[read.slot.index()];
            let expected = match read.kind {
                ReadKind::Status => Value::Bool(prev.status),
                ReadKind::Value | ReadKind::Cont => prev.value.clone(),
            };
            assert_eq!(
                read.value, expected,
                "tick {}: read of {} does not see the settled state",
                state.tick + 1,
                kernel.ir().slot(read.slot).display
            );
        }
        state = step.state;
    }
}

#[test]
fn corpus_reads_are_delayed() {
    let cases = golden_cases();
    for p in PROGRAMS {
        let program = parse(p.source).unwrap();
        if has_reentrant_decls(&program) {
            continue;
        }
        let schedule = cases
            .iter()
            .find(|c| c.program == p.name)
            .map(|c| c.schedule.clone())
            .unwrap_or_default();
        check_delayed_reads(&program, &schedule, 12);
    }
}

#[test]
fn reentered_declaration_reads_its_reset_value() {
    // fig17b re-enters `S` each time the outer loop restarts
    let p = PROGRAMS.iter().find(|p| p.name == "fig17b").unwrap();
    assert!(has_reentrant_decls(&parse(p.source).unwrap()));
    let case = golden_cases().into_iter().find(|c| c.id == "fig17b-nofault").unwrap();
    let trace = case.kernel().unwrap().run(&case.schedule, 4).unwrap();
    let s: Vec<_> = (1..=4).map(|t| trace.value("S", t).cloned().unwrap()).collect();
    let n = |k| Value::Num(Rational::from(k));
    assert_eq!(s, vec![n(1), n(2), n(1), n(2)]);
}
