//! Random well-formed programs, input schedules and single-writer flows
//! for property tests, with the checks shared by several test targets.
#![allow(dead_code)]

pub mod lti_oracle;

use std::collections::BTreeMap;

use hsj_core::kernel::{InputAssignment, Kernel, Schedule};
use hsj_core::rewrite::RewriteConfig;
use hsj_core::syntax::parse_with_params;
use hsj_core::Rational;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

/// Declarations shared by every generated body. All continuous variables
/// use `op+`, so parallel writers are always legal.
pub const PRELUDE: &str = "input signal I, J;\nsignal S, T;\nint signal V op+ = 0;\ncont x op+ = 0, y op+ = 1;\n";

fn rate() -> impl Strategy<Value = String> {
    prop_oneof![
        (-3i64..=3).prop_map(|n| n.to_string()),
        Just("1/2".to_string()),
        Just("-3/2".to_string()),
    ]
}

fn flow() -> impl Strategy<Value = String> {
    prop_oneof![
        (rate(), 0i64..12).prop_map(|(r, c)| format!("do {{x' = {r}}} until (x <= {c})")),
        (rate(), -4i64..4).prop_map(|(r, c)| format!("do {{y' = {r}}} until (y >= {c})")),
        (rate(), rate(), 0i64..12, -4i64..8)
            .prop_map(|(r, s, c, d)| format!("do {{x' = {r} || y' = {s}}} until (x <= {c} && y <= {d})")),
        rate().prop_map(|r| format!("do {{y' = {r}}} until (true)")),
    ]
}

fn leaf() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("emit S".to_string()),
        Just("emit T".to_string()),
        Just("pause".to_string()),
        (0i64..4).prop_map(|k| format!("x = {k}")),
        Just("?V = ?V + 1".to_string()),
        flow(),
        flow(),
    ]
}

fn guard() -> impl Strategy<Value = &'static str> {
    prop_oneof![Just("S"), Just("T"), Just("I"), Just("J"), Just("immediate I"), Just("immediate S")]
}

pub fn body() -> impl Strategy<Value = String> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (guard(), inner.clone()).prop_map(|(g, a)| format!("abort ({g}) {{ {a} }}")),
            (guard(), inner.clone()).prop_map(|(g, a)| format!("suspend ({g}) {{ {a} }}")),
            (prop_oneof![Just("S"), Just("I"), Just("x <= 3"), Just("?V > 1")], inner.clone(), inner.clone())
                .prop_map(|(c, a, b)| format!("if ({c}) {{ {a} }} else {{ {b} }}")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{{ {a} }} || {{ {b} }}")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a}; {b}")),
            inner.prop_map(|a| format!("loop {{ {a}; pause }}")),
        ]
    })
}

pub fn program() -> impl Strategy<Value = String> {
    body().prop_map(|b| format!("{PRELUDE}{b}"))
}

pub fn schedule(ticks: usize) -> impl Strategy<Value = Schedule> {
    proptest::collection::vec((any::<bool>(), any::<bool>()), ticks).prop_map(|v| {
        Schedule(
            v.into_iter()
                .map(|(i, j)| {
                    let mut a = InputAssignment::absent();
                    if i {
                        a = a.present("I");
                    }
                    if j {
                        a = a.present("J");
                    }
                    a
                })
                .collect(),
        )
    })
}

pub const WCRTS: [(i64, i64); 4] = [(1, 1), (1, 2), (2, 1), (3, 1)];
pub const MAX_TICKS: u64 = 80;

/// A single-writer flow `a' = rho` from `v0` under the half-space
/// invariant `p*a + q <= c` (or `>=`), built so that the invariant holds
/// at `v0` and after the first step.
#[derive(Debug, Clone)]
pub struct FlowCase {
    pub rho: Rational,
    pub v0: Rational,
    pub wcrt: Rational,
    pub p: Rational,
    pub q: Rational,
    pub c: Rational,
    pub upper: bool,
}

impl FlowCase {
    pub fn holds(&self, a: &Rational) -> bool {
        let lhs = &(&self.p * a) + &self.q;
        if self.upper {
            lhs <= self.c
        } else {
            lhs >= self.c
        }
    }

    /// Closed form of the value after `k` iterations.
    pub fn at(&self, k: u64) -> Rational {
        &self.v0 + &(&Rational::from(k as i64) * &(&self.rho * &self.wcrt))
    }

    /// Iteration after which the flow stops: the first `n >= 1` whose
    /// successor violates the invariant.
    pub fn expected_stop(&self) -> Option<u64> {
        (1..MAX_TICKS).find(|n| !self.holds(&self.at(n + 1)))
    }

    pub fn source(&self) -> String {
        let cmp = if self.upper { "<=" } else { ">=" };
        format!("param rho, v0, p, q, c;\ncont a = v0;\ndo {{a' = rho}} until (p * a + q {cmp} c)")
    }

    pub fn params(&self) -> BTreeMap<String, Rational> {
        [("rho", &self.rho), ("v0", &self.v0), ("p", &self.p), ("q", &self.q), ("c", &self.c)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect()
    }
}

pub fn rational(lo: i64, hi: i64) -> impl Strategy<Value = Rational> {
    (1i64..=4).prop_flat_map(move |d| (lo * d..=hi * d).prop_map(move |n| Rational::new(n, d)))
}

pub fn flow_case() -> impl Strategy<Value = FlowCase> {
    (
        rational(-5, 5),
        rational(-10, 10),
        prop::sample::select(WCRTS.to_vec()),
        prop_oneof![rational(1, 3), rational(-3, -1)],
        rational(-5, 5),
        rational(0, 20),
        any::<bool>(),
    )
        .prop_map(|(rho, v0, (wn, wd), p, q, slack, upper)| {
            let wcrt = Rational::new(wn, wd);
            let f = |a: &Rational| &(&p * a) + &q;
            let first = &v0 + &(&rho * &wcrt);
            let (l0, l1) = (f(&v0), f(&first));
            let c = if upper {
                &(if l0 > l1 { l0 } else { l1 }) + &slack
            } else {
                &(if l0 < l1 { l0 } else { l1 }) - &slack
            };
            FlowCase { rho, v0, wcrt, p, q, c, upper }
        })
}

/// Lemmas 1–3 and Theorem 1 for one case, against [`FlowCase::at`] and
/// [`FlowCase::expected_stop`].
pub fn check_flow_case(case: &FlowCase) -> Result<(), TestCaseError> {
    let program = parse_with_params(&case.source(), &case.params()).unwrap();
    let kernel = Kernel::new(&program, &RewriteConfig::new(case.wcrt.clone()).unwrap()).unwrap();
    let trace = kernel.run(&Schedule::empty(), MAX_TICKS).unwrap();
    let a = trace.cont_series("a");
    let step = &case.rho * &case.wcrt;
    let stop = case.expected_stop();
    prop_assert_eq!(trace.terminated_at, stop);
    let active = stop.unwrap_or(MAX_TICKS);

    // at least one iteration always happens
    prop_assert!(active >= 1);
    prop_assert_eq!(&a[1], &(&case.v0 + &step));
    for n in 0..active as usize {
        // one step per tick
        prop_assert_eq!(&a[n + 1], &(&a[n] + &step));
        // closed form
        prop_assert_eq!(&a[n + 1], &case.at(n as u64 + 1));
    }
    if let Some(k) = stop {
        let k = k as usize;
        // every settled value, the final one included, satisfies the
        // invariant, and one more step would not
        for v in &a[..=k] {
            prop_assert!(case.holds(v), "settled {} violates the invariant", v);
        }
        prop_assert!(!case.holds(&(&a[k] + &step)));
        prop_assert_eq!(&a[k + 1], &a[k]);
    }
    Ok(())
}

fn native_and_rewritten(src: &str, wcrt: Rational, params: &BTreeMap<String, Rational>) -> (Kernel, Kernel) {
    let program = parse_with_params(src, params).unwrap();
    let cfg = RewriteConfig::new(wcrt).unwrap();
    (Kernel::native(&program, &cfg).unwrap(), Kernel::new(&program, &cfg).unwrap())
}

/// Native flow interpretation and the rewritten program agree.
pub fn check_equivalence(
    src: &str,
    params: &BTreeMap<String, Rational>,
    wcrt: Rational,
    schedule: &Schedule,
    ticks: u64,
) -> Result<(), TestCaseError> {
    let (native, rewritten) = native_and_rewritten(src, wcrt, params);
    match (native.run(schedule, ticks), rewritten.run(schedule, ticks)) {
        (Ok(a), Ok(b)) => prop_assert!(a.observably_equal(&b), "{:?}", a.first_divergence(&b)),
        (Err(a), Err(b)) => prop_assert_eq!(a.tick, b.tick),
        (a, b) => prop_assert!(false, "one side failed: {:?} vs {:?}", a.err(), b.err()),
    }
    Ok(())
}
