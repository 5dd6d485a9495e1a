//! Acceptance suite: one line per criterion, `PASS` or `FAIL` with the
//! observed values. Runs without the libtest harness so the lines are
//! always printed; the process fails if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use hsj_core::corpus::{self, golden_cases};
use hsj_core::haref::{self, HybridAutomaton, VarMap};
use hsj_core::kernel::{Kernel, Schedule};
use hsj_core::rewrite::{flow_sites, RewriteConfig};
use hsj_core::syntax::parse_with_params;
use hsj_core::trace::Trace;
use hsj_core::ttl::{ttl2_delta, Snapshot, TtlMode};
use hsj_core::verify::{check_reachable, InputAlphabet, SearchOptions, Verdict};
use hsj_core::Rational;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn r(n: i64) -> Rational {
    Rational::from(n)
}

fn run(name: &str, wcrt: i64, params: &[(&str, i64)], schedule: &str, ticks: u64) -> Result<Trace, String> {
    let params: BTreeMap<String, Rational> = params.iter().map(|(k, v)| (k.to_string(), r(*v))).collect();
    let src = corpus::program(name).ok_or(format!("no program {name}"))?.source;
    let program = parse_with_params(src, &params).map_err(|e| e.to_string())?;
    let kernel = Kernel::new(&program, &RewriteConfig::new(r(wcrt)).unwrap()).map_err(|e| e.to_string())?;
    let schedule = Schedule::from_json(schedule).map_err(|e| e.to_string())?;
    kernel.run(&schedule, ticks).map_err(|e| e.to_string())
}

fn cont(t: &Trace, var: &str, tick: u64) -> Rational {
    t.cont(var, tick).cloned().unwrap_or_else(|| r(i64::MIN))
}

fn last(t: &Trace, var: &str) -> Rational {
    t.last().and_then(|rec| rec.conts.get(var)).cloned().unwrap_or_else(|| r(i64::MIN))
}

fn check(ok: bool, observed: String) -> Outcome {
    if ok {
        Ok(observed)
    } else {
        Err(observed)
    }
}

fn hsj(args: &[&str]) -> (Option<i32>, String, Duration) {
    let started = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_hsj")).args(args).output().expect("hsj runs");
    (out.status.code(), String::from_utf8_lossy(&out.stdout).into_owned(), started.elapsed())
}

fn runner(cases: u32) -> TestRunner {
    let config = Config { failure_persistence: None, ..Config::with_cases(cases) };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn c1() -> Outcome {
    let started = Instant::now();
    let t = run("fig12a", 2, &[], "[]", 10)?;
    let listing = run("fig14a", 2, &[], "[]", 10)?;
    let elapsed = started.elapsed();
    let a = last(&t, "a");
    let r_ticks = listing.emissions("R");
    check(
        a == r(2) && last(&listing, "a") == r(2) && r_ticks == [1] && elapsed < Duration::from_secs(1),
        format!("a = {a}, R at ticks {r_ticks:?}, {:.3}s", elapsed.as_secs_f64()),
    )
}

fn c2() -> Outcome {
    let t = run("fig14c", 2, &[], "[]", 10)?;
    let (a, b) = (last(&t, "a"), last(&t, "b"));
    check(
        t.terminated_at == Some(2) && a == r(8) && b == r(8),
        format!("terminated at {:?}, a = {a}, b = {b}", t.terminated_at),
    )
}

fn c3() -> Outcome {
    let e = run("fig14e", 2, &[], "[]", 10)?;
    let g = run("fig14g", 2, &[], "[]", 10)?;
    let frozen = (3..=5).all(|n| cont(&g, "b", n) == r(6));
    check(
        e.terminated_at == Some(3)
            && last(&e, "a") == r(6)
            && last(&e, "b") == r(6)
            && g.terminated_at == Some(5)
            && last(&g, "a") == r(10)
            && frozen,
        format!(
            "single invariant: terminated at {:?}, a = {}, b = {}; parallel: terminated at {:?}, a = {}, b frozen at 6 from tick 3: {frozen}",
            e.terminated_at,
            last(&e, "a"),
            last(&e, "b"),
            g.terminated_at,
            last(&g, "a")
        ),
    )
}

fn c4() -> Outcome {
    let source = run("fig12e", 2, &[], "[]", 10)?;
    let listing = run("fig14i", 2, &[], "[]", 10)?;
    let (a, b) = (last(&source, "a"), last(&listing, "a"));
    check(
        source.emissions("S") == [2] && a == r(6),
        format!(
            "S at ticks {:?}; final a = {a} (source), {b} (rewritten listing); expected 6",
            source.emissions("S")
        ),
    )
}

fn c5() -> Outcome {
    let fault = run("fig17a", 2, &[], r#"[{"tick":1,"present":["FAULT"]}]"#, 2)?;
    let calm = run("fig17a", 2, &[], "[]", 3)?;
    let reset = run("fig17e", 2, &[], "[]", 4)?;
    let series: Vec<Rational> = (1..=4).map(|n| cont(&reset, "a", n)).collect();
    let (f, c) = (cont(&fault, "a", 2), cont(&calm, "a", 3));
    check(
        f == r(6) && c == r(8) && series == [r(3), r(5), r(1), r(3)],
        format!("with FAULT a(2) = {f}; without a(3) = {c}; pause after reset {series:?}"),
    )
}

fn c6() -> Outcome {
    let a = run("fig18a", 2, &[], "[]", 4)?;
    let c = run("fig18c", 2, &[], "[]", 4)?;
    let program = parse_with_params(corpus::program("fig18c").unwrap().source, &BTreeMap::new()).map_err(|e| e.to_string())?;
    let site = flow_sites(&program).into_iter().next().ok_or("no flow")?;
    let snap = Snapshot { conts: [("a".to_string(), r(0))].into(), ..Snapshot::default() };
    let delta = ttl2_delta(&site.odes, &site.vars, &site.combine, &snap, &r(2), TtlMode::LastTau).map_err(|e| e.to_string())?;
    let tau = delta.get("a").cloned().unwrap_or_else(|| r(i64::MIN));
    let a1 = cont(&a, "a", 1);
    check(
        a1 == r(3) && c.terminated_at == Some(1) && tau == r(12),
        format!("a(1) = {a1}; double writer terminated at {:?} with tau = {tau}", c.terminated_at),
    )
}

fn c7() -> Outcome {
    let (code, out, elapsed) = hsj(&[
        "verify", "corpus:fig19a", "--wcrt", "2", "--param", "alpha=3", "--bound", "12", "--target", "ERROR",
    ]);
    let in_window = out.contains("transition [2,4)");
    check(
        code == Some(1) && in_window && elapsed < Duration::from_secs(5),
        format!("exit {code:?}, witness in [2,4): {in_window}, {:.3}s", elapsed.as_secs_f64()),
    )
}

fn c8() -> Outcome {
    let t = run("fig19a", 2, &[("alpha", 2)], "[]", 12)?;
    let tick = t.first_emission("ERROR");
    let x = tick.map(|n| cont(&t, "x", n));
    check(
        tick == Some(7) && x == Some(r(12)),
        format!("ERROR first at tick {tick:?} with x = {x:?} (beta = 10)"),
    )
}

fn c9() -> Outcome {
    let t = run("fig19a", 1, &[("alpha", 1)], "[]", 30)?;
    let src = corpus::program("fig19a").unwrap().source;
    let params = BTreeMap::from([("alpha".to_string(), r(1))]);
    let program = parse_with_params(src, &params).map_err(|e| e.to_string())?;
    let kernel = Kernel::new(&program, &RewriteConfig::new(r(1)).unwrap()).map_err(|e| e.to_string())?;
    let verdict = check_reachable(&kernel, &InputAlphabet::presence_of_all(&kernel), 30, "ERROR", &SearchOptions::default())
        .map_err(|e| e.to_string())?;
    let unreachable = matches!(verdict, Verdict::Unreachable { bound: 30, .. });
    let done = t.emissions("DONE");
    check(!done.is_empty() && unreachable, format!("DONE at ticks {done:?}; ERROR unreachable within 30: {unreachable}"))
}

fn c10() -> Outcome {
    let cases = 256;
    let res = runner(cases).run(&common::flow_case(), |c| common::check_flow_case(&c));
    match res {
        Ok(()) => Ok(format!("{cases}/{cases} random flows satisfy the step, closed-form, iteration and preemption properties")),
        Err(e) => Err(format!("counterexample: {e}")),
    }
}

fn c11() -> Outcome {
    let cases = golden_cases();
    for case in &cases {
        common::check_equivalence(case.source(), &case.params, case.wcrt.clone(), &case.schedule, case.max_ticks)
            .map_err(|e| format!("{}: {e}", case.id))?;
    }
    let random = 100;
    let strategy = (common::program(), common::schedule(24), prop::sample::select(common::WCRTS.to_vec()));
    runner(random)
        .run(&strategy, |(src, schedule, (wn, wd))| {
            common::check_equivalence(&src, &BTreeMap::new(), Rational::new(wn, wd), &schedule, 24)
        })
        .map_err(|e| format!("counterexample: {e}"))?;
    Ok(format!("{} corpus cases and {random} random programs: native and rewritten traces identical", cases.len()))
}

fn c12() -> Outcome {
    let overrides = BTreeMap::from([("alpha".to_string(), r(3))]);
    let ha = HybridAutomaton::from_toml(corpus::automaton("fig01b").unwrap(), &overrides).map_err(|e| e.to_string())?;
    let program = run("fig19a", 2, &[("alpha", 3)], "[]", 10)?;
    let cmp = haref::compare(&ha, &program, &VarMap::new(), &r(20)).map_err(|e| e.to_string())?;
    let switch = cmp.ideal.switches.first().ok_or("automaton never switches")?;
    let switch_tick = (&switch.time * &Rational::new(1, 2)).ceil().to_u64();
    let div = cmp.first_divergence.as_ref().map(|d| d.tick);
    let at_d = |t: &haref::HaTrace| t.entries("D").next().map(|s| s.values["x"].clone());
    let (ideal, delayed) = (at_d(&cmp.ideal), at_d(&cmp.delayed));
    check(
        div.is_some() && div == switch_tick && ideal == Some(r(9)) && delayed == Some(r(11)),
        format!(
            "first switch at t = {} (tick {switch_tick:?}), first divergence at tick {div:?}; x entering D: {ideal:?} ideal, {delayed:?} with one-reaction delay",
            switch.time
        ),
    )
}

fn c13() -> Outcome {
    let cases = 50;
    runner(cases)
        .run(&common::lti_oracle::system(), |sys| common::lti_oracle::check_system(&sys))
        .map_err(|e| format!("counterexample: {e}"))?;
    Ok(format!("{cases}/{cases} random systems agree with the elimination oracle; delayed-output matrix identical"))
}

fn main() {
    let criteria: [Criterion; 13] = [
        ("single flow preempted in the first transition", c1),
        ("shared invariant terminates at tick 2", c2),
        ("shared invariant vs parallel invariants", c3),
        ("flow preempted by a delayed abort", c4),
        ("loop re-entry around a preempted flow", c5),
        ("simultaneous writers and double-writer look-ahead", c6),
        ("manufacturing cell: sampling too slow to observe alpha", c7),
        ("manufacturing cell: diverter too slow", c8),
        ("manufacturing cell: correct configuration", c9),
        ("discretised flow properties", c10),
        ("rewrite equivalence", c11),
        ("hybrid automaton vs program", c12),
        ("observability and controllability", c13),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        match f() {
            Ok(obs) => println!("PASS {n:>2} {name}: {obs}"),
            Err(obs) => {
                println!("FAIL {n:>2} {name}: {obs}");
                failed.push(n);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        println!("failing: {failed:?}");
        std::process::exit(1);
    }
}
