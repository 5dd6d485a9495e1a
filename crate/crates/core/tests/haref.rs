//! The carousel automaton against the manufacturing-cell program.

use std::collections::BTreeMap;

use hsj_core::corpus;
use hsj_core::haref::{compare, simulate, HybridAutomaton, SimOptions, VarMap};
use hsj_core::kernel::{Kernel, Schedule};
use hsj_core::rewrite::RewriteConfig;
use hsj_core::syntax::parse_with_params;
use hsj_core::Rational;

fn r(n: i64) -> Rational {
    Rational::from(n)
}

fn program_trace(alpha: i64, wcrt: i64, ticks: u64) -> hsj_core::trace::Trace {
    let params = BTreeMap::from([("alpha".to_string(), r(alpha))]);
    let src = corpus::program("fig19a").unwrap().source;
    let prog = parse_with_params(src, &params).unwrap();
    let kernel = Kernel::new(&prog, &RewriteConfig::new(r(wcrt)).unwrap()).unwrap();
    kernel.run(&Schedule::default(), ticks).unwrap()
}

fn carousel(alpha: i64) -> HybridAutomaton {
    let overrides = BTreeMap::from([("alpha".to_string(), r(alpha))]);
    HybridAutomaton::from_toml(corpus::automaton("fig01b").unwrap(), &overrides).unwrap()
}

/// Oracle: the ideal automaton is piecewise linear with x' = 1 throughout
/// a cycle, so x(t) = t mod beta and y(t) = clamp(t - alpha, 0, theta)
/// within the first cycle.
fn oracle(alpha: i64, t: i64) -> (i64, i64) {
    let (beta, theta) = (10, 6);
    let c = t % beta;
    (c, (c - alpha).clamp(0, theta))
}

#[test]
fn ideal_automaton_matches_the_closed_form() {
    for alpha in [1, 2, 3] {
        let trace = simulate(&carousel(alpha), &r(30), &SimOptions::default()).unwrap();
        for t in 0..30 {
            let (x, y) = oracle(alpha, t);
            assert_eq!(trace.value_at("x", &r(t)), Some(r(x)), "alpha {alpha} t {t}");
            assert_eq!(trace.value_at("y", &r(t)), Some(r(y)), "alpha {alpha} t {t}");
        }
    }
}

#[test]
fn sampled_controller_diverges_at_the_first_switch() {
    let cmp = compare(&carousel(3), &program_trace(3, 2, 10), &VarMap::new(), &r(20)).unwrap();
    let d = cmp.first_divergence.clone().unwrap();
    let switch = cmp.ideal.switches.first().unwrap();
    // the first switch (t = 3) falls inside the reaction ending at tick 2
    assert_eq!(switch.time, r(3));
    assert_eq!((d.tick, d.time.clone()), (2, r(4)));
    assert_eq!(d.tick, (switch.time.clone() * Rational::new(1, 2)).ceil().to_u64().unwrap());
    assert_eq!(cmp.ideal.entries("D").next().unwrap().values["x"], r(9));
    assert_eq!(cmp.delayed.entries("D").next().unwrap().values["x"], r(11));
}

#[test]
fn unit_reaction_time_tracks_the_automaton_until_storage() {
    let map = VarMap::from([("x".to_string(), "x".to_string())]);
    let cmp = compare(&carousel(1), &program_trace(1, 1, 30), &map, &r(30)).unwrap();
    let d = cmp.first_divergence.unwrap();
    // x agrees through tick 9; at t = 10 the automaton stores the item and
    // resets x in the same instant, the program only in the next reaction
    assert_eq!(d.tick, 10);
    assert_eq!((d.program.clone(), d.automaton.clone()), (r(10), r(0)));
    assert_eq!(cmp.rows[11].values["x"], (r(0), r(1)));
}
