//! Two-tick look-ahead ("time to live") that bounds every flow loop.
//!
//! [`predict`] computes the set Δ of values each flow variable would hold
//! two ticks from now. Variables driven by a single ODE use
//! `τ = ⟦v⟧ + 2·ρ·wcrt`; variables driven by several simultaneous ODEs
//! iterate two combine steps over the per-ODE contributions. The loop may
//! run another iteration iff the `until` invariant holds under Δ.
//!
//! The value of the multi-ODE case is the τ computed in the second step.
//! Reducing the final Γ once more (the other reading of the pseudocode)
//! double-counts on `op+`; it is available as [`TtlMode::FinalReduce`] for
//! comparison only.

use std::collections::BTreeMap;
use std::fmt::Display;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;
use crate::syntax::{apply_binop, apply_unop, CombineOp, Expr, Name, Ode, OperandError};
use crate::value::Value;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TtlMode {
    /// Result of the multi-ODE branch is the second step's τ.
    #[default]
    LastTau,
    /// Compatibility reading: one more reduce over the final Γ.
    FinalReduce,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TtlError {
    #[error("flow variable `{var}` has no ODE in this flow")]
    MissingOde { var: String },
    #[error("flow variable `{var}` has several ODEs; the single-writer algorithm does not apply")]
    MultipleOdes { var: String },
    #[error("flow variable `{var}` has several ODEs but no combine operator")]
    MissingCombine { var: String },
    #[error("name `{name}` is unbound during evaluation")]
    Unbound { name: String },
    #[error(transparent)]
    Operand(#[from] OperandError),
    #[error("expression must evaluate to a boolean")]
    NotBoolean,
}

/// Δ: predicted value of each flow variable two ticks ahead.
pub type DeltaSet = BTreeMap<Name, Rational>;
/// ⟦v⟧: settled values of continuous variables visible in this transition.
pub type Valuation = BTreeMap<Name, Rational>;

/// Settled snapshot of the previous tick, the only state a transition reads.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub statuses: BTreeMap<Name, bool>,
    pub values: BTreeMap<Name, Value>,
    pub conts: Valuation,
}

/// Δ over arbitrary variable keys; the kernel uses storage slots, the
/// name-based entry points below use names.
///
/// `vars` lists 𝒱 in order; `odes` is Ω; `combine` is ℳ; `current` is ⟦·⟧.
pub fn predict<K: Ord + Clone + Display>(
    odes: &[(K, Rational)],
    vars: &[K],
    combine: impl Fn(&K) -> Option<CombineOp>,
    current: impl Fn(&K) -> Result<Rational, TtlError>,
    wcrt: &Rational,
    mode: TtlMode,
) -> Result<BTreeMap<K, Rational>, TtlError> {
    let mut delta = BTreeMap::new();
    for v in vars {
        let rates: Vec<&Rational> = odes.iter().filter(|(k, _)| k == v).map(|(_, r)| r).collect();
        let now = current(v)?;
        let tau = match rates.as_slice() {
            [] => return Err(TtlError::MissingOde { var: v.to_string() }),
            [rho] => now + Rational::from(2) * (*rho) * wcrt,
            _ => {
                let op = combine(v).ok_or_else(|| TtlError::MissingCombine { var: v.to_string() })?;
                let mut gamma = vec![now; rates.len()];
                let mut tau = Rational::zero();
                for _step in 0..2 {
                    tau = fold(
                        op,
                        gamma.iter().zip(&rates).map(|(g, rho)| g + &(*rho * wcrt)),
                    );
                    gamma = vec![tau.clone(); rates.len()];
                }
                match mode {
                    TtlMode::LastTau => tau,
                    TtlMode::FinalReduce => fold(op, gamma.into_iter()),
                }
            }
        };
        delta.insert(v.clone(), tau);
    }
    Ok(delta)
}

fn fold(op: CombineOp, mut items: impl Iterator<Item = Rational>) -> Rational {
    let first = items.next().expect("at least two contributions");
    items.fold(first, |acc, x| op.apply(&acc, &x))
}

fn ode_pairs(odes: &[Ode]) -> Vec<(Name, Rational)> {
    odes.iter().map(|o| (o.var.clone(), o.rate.clone())).collect()
}

fn current_of(snap: &Snapshot) -> impl Fn(&Name) -> Result<Rational, TtlError> + '_ {
    |v| {
        snap.conts
            .get(v)
            .cloned()
            .ok_or_else(|| TtlError::Unbound { name: v.clone() })
    }
}

/// Algorithm 1: every variable in `vars` has exactly one ODE.
pub fn ttl1(
    odes: &[Ode],
    invariant: &Expr,
    vars: &[Name],
    snap: &Snapshot,
    wcrt: &Rational,
) -> Result<bool, TtlError> {
    for v in vars {
        if odes.iter().filter(|o| &o.var == v).count() > 1 {
            return Err(TtlError::MultipleOdes { var: v.clone() });
        }
    }
    let delta = predict(
        &ode_pairs(odes),
        vars,
        |_| None,
        current_of(snap),
        wcrt,
        TtlMode::LastTau,
    )?;
    holds_at_delta(invariant, &delta, snap)
}

/// Algorithm 2: variables with several ODEs fold their contributions with
/// the combine operator in `combine`.
pub fn ttl2(
    odes: &[Ode],
    invariant: &Expr,
    vars: &[Name],
    combine: &BTreeMap<Name, CombineOp>,
    snap: &Snapshot,
    wcrt: &Rational,
    mode: TtlMode,
) -> Result<bool, TtlError> {
    let delta = ttl2_delta(odes, vars, combine, snap, wcrt, mode)?;
    holds_at_delta(invariant, &delta, snap)
}

/// The Δ that [`ttl2`] evaluates the invariant against.
pub fn ttl2_delta(
    odes: &[Ode],
    vars: &[Name],
    combine: &BTreeMap<Name, CombineOp>,
    snap: &Snapshot,
    wcrt: &Rational,
    mode: TtlMode,
) -> Result<DeltaSet, TtlError> {
    predict(
        &ode_pairs(odes),
        vars,
        |v| combine.get(v).copied(),
        current_of(snap),
        wcrt,
        mode,
    )
}

/// Evaluates `invariant` with continuous variables in Δ bound to their
/// predicted values; everything else is read from the snapshot.
pub fn holds_at_delta(invariant: &Expr, delta: &DeltaSet, snap: &Snapshot) -> Result<bool, TtlError> {
    match eval(invariant, delta, snap)? {
        Value::Bool(b) => Ok(b),
        Value::Num(_) => Err(TtlError::NotBoolean),
    }
}

fn eval(e: &Expr, delta: &DeltaSet, snap: &Snapshot) -> Result<Value, TtlError> {
    let unbound = |n: &Name| TtlError::Unbound { name: n.clone() };
    Ok(match e {
        Expr::Num(n) | Expr::Param(_, n) => Value::Num(n.clone()),
        Expr::Bool(b) => Value::Bool(*b),
        Expr::Status(n) => Value::Bool(*snap.statuses.get(n).ok_or_else(|| unbound(n))?),
        Expr::Value(n) => snap.values.get(n).cloned().ok_or_else(|| unbound(n))?,
        Expr::Cont(n) => Value::Num(
            delta
                .get(n)
                .or_else(|| snap.conts.get(n))
                .cloned()
                .ok_or_else(|| unbound(n))?,
        ),
        Expr::Unary(op, a) => apply_unop(*op, eval(a, delta, snap)?)?,
        Expr::Binary(op, a, b) => apply_binop(*op, eval(a, delta, snap)?, eval(b, delta, snap)?)?,
        Expr::Ttl(_) => return Err(TtlError::Unbound { name: "TTL".into() }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::BinOp;

    fn r(n: i64) -> Rational {
        Rational::from(n)
    }

    fn ode(v: &str, rate: i64) -> Ode {
        Ode {
            var: v.into(),
            rate: r(rate),
        }
    }

    fn le(v: &str, k: i64) -> Expr {
        Expr::binary(BinOp::Le, Expr::Cont(v.into()), Expr::Num(r(k)))
    }

    fn snap(vals: &[(&str, i64)]) -> Snapshot {
        Snapshot {
            conts: vals.iter().map(|(k, v)| (k.to_string(), r(*v))).collect(),
            ..Default::default()
        }
    }

    #[test]
    fn single_variable_overshoots() {
        let s = snap(&[("a", 0)]);
        assert!(!ttl1(&[ode("a", 1)], &le("a", 2), &["a".into()], &s, &r(2)).unwrap());
        assert!(ttl1(&[ode("a", 0)], &le("a", 2), &["a".into()], &s, &r(2)).unwrap());
    }

    #[test]
    fn two_variables_at_second_transition() {
        let inv = Expr::binary(BinOp::And, le("a", 16), le("b", 10));
        let vars = ["a".to_string(), "b".to_string()];
        let odes = [ode("a", 2), ode("b", 2)];
        assert!(ttl1(&odes, &inv, &vars, &snap(&[("a", 0), ("b", 0)]), &r(2)).unwrap());
        let s = snap(&[("a", 4), ("b", 4)]);
        let delta = ttl2_delta(&odes, &vars, &BTreeMap::new(), &s, &r(2), TtlMode::LastTau).unwrap();
        assert_eq!(delta, [("a".to_string(), r(12)), ("b".to_string(), r(12))].into());
        assert!(!ttl1(&odes, &inv, &vars, &s, &r(2)).unwrap());
    }

    #[test]
    fn double_writer_last_tau_and_compat() {
        let odes = [ode("a", 1), ode("a", 1)];
        let m: BTreeMap<_, _> = [("a".to_string(), CombineOp::Plus)].into();
        let s = snap(&[("a", 0)]);
        let vars = ["a".to_string()];
        let d = ttl2_delta(&odes, &vars, &m, &s, &r(2), TtlMode::LastTau).unwrap();
        assert_eq!(d["a"], r(12));
        let d = ttl2_delta(&odes, &vars, &m, &s, &r(2), TtlMode::FinalReduce).unwrap();
        assert_eq!(d["a"], r(24));
        assert!(!ttl2(&odes, &le("a", 4), &vars, &m, &s, &r(2), TtlMode::LastTau).unwrap());
        assert!(ttl2(&odes, &le("a", 100), &vars, &m, &s, &r(2), TtlMode::LastTau).unwrap());
        assert_eq!(
            ttl2(&odes, &le("a", 4), &vars, &BTreeMap::new(), &s, &r(2), TtlMode::LastTau),
            Err(TtlError::MissingCombine { var: "a".into() })
        );
        assert_eq!(
            ttl1(&odes, &le("a", 4), &vars, &s, &r(2)),
            Err(TtlError::MultipleOdes { var: "a".into() })
        );
    }

    #[test]
    fn holds_at_delta_examples() {
        let d: DeltaSet = [("a".to_string(), r(4))].into();
        assert!(!holds_at_delta(&le("a", 2), &d, &Snapshot::default()).unwrap());
        assert!(holds_at_delta(&Expr::Bool(true), &d, &Snapshot::default()).unwrap());
        let d: DeltaSet = [("a".to_string(), r(8)), ("b".to_string(), r(8))].into();
        let inv = Expr::binary(BinOp::And, le("a", 16), le("b", 10));
        assert!(holds_at_delta(&inv, &d, &Snapshot::default()).unwrap());
        assert!(matches!(
            holds_at_delta(&le("c", 1), &d, &Snapshot::default()),
            Err(TtlError::Unbound { .. })
        ));
    }
}
