//! Reference hybrid-automaton semantics.
//!
//! A linear hybrid automaton has locations with constant rates and an
//! invariant, and edges with a guard, a reset and an optional priority.
//! [`simulate`] runs it exactly over the rationals with urgent switching:
//! an edge fires at the earliest instant its guard holds. Edges marked
//! `controller` model decisions taken by the discrete controller; giving
//! [`SimOptions::switch_delay`] makes them fire that long after they became
//! enabled, which is how a controller that samples once per reaction
//! behaves. [`compare`] lines a program trace up against the automaton on
//! the tick grid.
//!
//! Automata are described in TOML:
//!
//! ```toml
//! variables = ["x", "y"]
//! initial = "A"
//! [constants]
//! alpha = "3"
//! [init]
//! x = "0"
//! [[location]]
//! name = "A"
//! rates = { x = "1" }
//! invariant = "x <= alpha"
//! [[edge]]
//! from = "A"
//! to = "B"
//! guard = "x >= alpha"
//! reset = { y = "0" }
//! controller = true
//! ```

mod constraint;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use constraint::{Atom, Cmp, Constraint, Interval, Valuation};

use crate::rational::Rational;
use crate::trace::Trace;

/// Discrete steps allowed at a single instant before the run is declared Zeno.
const MAX_INSTANT_STEPS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HaError {
    #[error("invalid automaton description: {0}")]
    Format(String),
    #[error("in constraint `{text}`: {msg}")]
    Constraint { text: String, msg: String },
    #[error("unknown {what} `{name}`")]
    Unknown { what: &'static str, name: String },
    #[error("deadlock in location {location} at time {time}: the invariant expires and no edge is enabled")]
    Deadlock { location: String, time: Rational },
    #[error("nondeterminism in location {location} at time {time}: edges {edges:?} are enabled together with equal priority")]
    Nondeterminism { location: String, time: Rational, edges: Vec<String> },
    #[error("guard of edge {edge} has no earliest enabling instant after time {time} (strict bound)")]
    StrictGuard { edge: String, time: Rational },
    #[error("invariant of location {location} does not hold at time {time}")]
    Invariant { location: String, time: Rational },
    #[error("more than {MAX_INSTANT_STEPS} discrete steps at time {time}")]
    Zeno { time: Rational },
    #[error("variable map: {0}")]
    Map(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAutomaton {
    #[serde(default)]
    name: Option<String>,
    variables: Vec<String>,
    initial: String,
    #[serde(default)]
    constants: BTreeMap<String, Rational>,
    #[serde(default)]
    init: BTreeMap<String, String>,
    #[serde(default, rename = "location")]
    locations: Vec<RawLocation>,
    #[serde(default, rename = "edge")]
    edges: Vec<RawEdge>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLocation {
    name: String,
    #[serde(default)]
    rates: BTreeMap<String, String>,
    #[serde(default)]
    invariant: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    from: String,
    to: String,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    guard: Option<String>,
    #[serde(default)]
    reset: BTreeMap<String, String>,
    #[serde(default)]
    priority: Option<i64>,
    #[serde(default)]
    controller: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Location {
    pub name: String,
    /// Rate of every variable; missing variables are frozen.
    pub rates: Valuation,
    pub invariant: Constraint,
}

#[derive(Debug, Clone, Serialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub label: String,
    pub guard: Constraint,
    pub reset: Valuation,
    pub priority: Option<i64>,
    pub controller: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HybridAutomaton {
    pub name: String,
    pub variables: Vec<String>,
    pub constants: BTreeMap<String, Rational>,
    pub locations: Vec<Location>,
    pub edges: Vec<Edge>,
    pub initial: usize,
    pub init: Valuation,
}

fn value(text: &str, constants: &BTreeMap<String, Rational>) -> Result<Rational, HaError> {
    let t = text.trim();
    let (neg, body) = t.strip_prefix('-').map_or((false, t), |b| (true, b.trim()));
    let v = match constants.get(body) {
        Some(v) => v.clone(),
        None => body
            .parse()
            .map_err(|_| HaError::Format(format!("`{t}` is neither a number nor a constant")))?,
    };
    Ok(if neg { -v } else { v })
}

impl HybridAutomaton {
    /// Loads an automaton, overriding its constants with `overrides`.
    pub fn from_toml(text: &str, overrides: &BTreeMap<String, Rational>) -> Result<Self, HaError> {
        let raw: RawAutomaton = toml::from_str(text).map_err(|e| HaError::Format(e.message().to_string()))?;
        let mut constants = raw.constants;
        for (k, v) in overrides {
            constants.insert(k.clone(), v.clone());
        }
        let known = |x: &str| -> Result<(), HaError> {
            if raw.variables.iter().any(|v| v == x) {
                Ok(())
            } else {
                Err(HaError::Unknown { what: "variable", name: x.into() })
            }
        };
        let valuation = |m: &BTreeMap<String, String>| -> Result<Valuation, HaError> {
            m.iter()
                .map(|(k, v)| {
                    known(k)?;
                    Ok((k.clone(), value(v, &constants)?))
                })
                .collect()
        };
        let constraint = |text: &Option<String>| -> Result<Constraint, HaError> {
            let c = Constraint::parse(text.as_deref().unwrap_or("true"), &constants)?;
            c.variables().try_for_each(|x| known(x))?;
            Ok(c)
        };
        let locations = raw
            .locations
            .iter()
            .map(|l| {
                Ok(Location {
                    name: l.name.clone(),
                    rates: valuation(&l.rates)?,
                    invariant: constraint(&l.invariant)?,
                })
            })
            .collect::<Result<Vec<_>, HaError>>()?;
        let index = |name: &str| {
            locations
                .iter()
                .position(|l| l.name == name)
                .ok_or_else(|| HaError::Unknown { what: "location", name: name.into() })
        };
        let edges = raw
            .edges
            .iter()
            .map(|e| {
                let (from, to) = (index(&e.from)?, index(&e.to)?);
                Ok(Edge {
                    from,
                    to,
                    label: e.label.clone().unwrap_or_else(|| format!("{}->{}", e.from, e.to)),
                    guard: constraint(&e.guard)?,
                    reset: valuation(&e.reset)?,
                    priority: e.priority,
                    controller: e.controller,
                })
            })
            .collect::<Result<Vec<_>, HaError>>()?;
        let mut init: Valuation = raw.variables.iter().map(|v| (v.clone(), Rational::zero())).collect();
        init.extend(valuation(&raw.init)?);
        Ok(HybridAutomaton {
            name: raw.name.unwrap_or_else(|| "automaton".into()),
            initial: index(&raw.initial)?,
            variables: raw.variables,
            constants,
            locations,
            edges,
            init,
        })
    }

    pub fn location(&self, name: &str) -> Option<usize> {
        self.locations.iter().position(|l| l.name == name)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    /// Delay between enabling and firing of `controller` edges.
    pub switch_delay: Option<Rational>,
}

/// Continuous evolution in one location over `[start, end]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub location: String,
    pub start: Rational,
    pub end: Rational,
    pub values: Valuation,
    pub rates: Valuation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Switch {
    pub time: Rational,
    pub edge: String,
    pub from: String,
    pub to: String,
    /// Valuation after the reset.
    pub values: Valuation,
}

/// An invariant that failed while a delayed switch was pending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub time: Rational,
    pub location: String,
    pub values: Valuation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HaTrace {
    pub segments: Vec<Segment>,
    pub switches: Vec<Switch>,
    pub violations: Vec<Violation>,
    pub end: Rational,
    pub final_location: String,
    pub final_values: Valuation,
}

impl HaTrace {
    /// State at time `t` after every discrete step taken at `t`.
    pub fn state_at(&self, t: &Rational) -> Option<(&str, Valuation)> {
        if t > &self.end || t.is_negative() {
            return None;
        }
        let later_switch = self.switches.iter().any(|s| &s.time >= t);
        if t == &self.end || (!later_switch && self.segments.last().is_none_or(|s| t > &s.end)) {
            return Some((&self.final_location, self.final_values.clone()));
        }
        let seg = self.segments.iter().rev().find(|s| &s.start <= t)?;
        let dt = t - &seg.start;
        let vals = seg
            .values
            .iter()
            .map(|(k, v)| (k.clone(), v + &(seg.rates.get(k).cloned().unwrap_or_else(Rational::zero) * &dt)))
            .collect();
        Some((&seg.location, vals))
    }

    pub fn value_at(&self, var: &str, t: &Rational) -> Option<Rational> {
        self.state_at(t).and_then(|(_, v)| v.get(var).cloned())
    }

    /// Switches into `location`, in time order.
    pub fn entries<'a>(&'a self, location: &'a str) -> impl Iterator<Item = &'a Switch> + 'a {
        self.switches.iter().filter(move |s| s.to == location)
    }
}

fn advance(v: &Valuation, rates: &Valuation, dt: &Rational) -> Valuation {
    v.iter()
        .map(|(k, x)| (k.clone(), x + &(rates.get(k).cloned().unwrap_or_else(Rational::zero) * dt)))
        .collect()
}

/// Runs `ha` from its initial state up to time `horizon`.
pub fn simulate(ha: &HybridAutomaton, horizon: &Rational, opts: &SimOptions) -> Result<HaTrace, HaError> {
    let delay = opts.switch_delay.clone().filter(|d| d.is_positive());
    let tolerant = delay.is_some();
    let mut out = HaTrace {
        segments: Vec::new(),
        switches: Vec::new(),
        violations: Vec::new(),
        end: horizon.clone(),
        final_location: String::new(),
        final_values: Valuation::new(),
    };
    let mut loc = ha.initial;
    let mut v = ha.init.clone();
    let mut t = Rational::zero();
    let mut steps_here = 0usize;
    let mut pending: Option<(usize, Rational)> = None;

    let violate = |out: &mut HaTrace, loc: usize, t: &Rational, v: &Valuation| -> Result<(), HaError> {
        let location = ha.locations[loc].name.clone();
        if !tolerant {
            return Err(HaError::Invariant { location, time: t.clone() });
        }
        if out.violations.last().is_none_or(|p| p.location != location || p.time < *t) {
            out.violations.push(Violation { time: t.clone(), location, values: v.clone() });
        }
        Ok(())
    };

    if !ha.locations[loc].invariant.holds(&v) {
        violate(&mut out, loc, &t, &v)?;
    }

    loop {
        let here = &ha.locations[loc];
        let rates = &here.rates;
        let inv = here.invariant.interval(&v, rates);
        let (edge, at) = if let Some((e, fire)) = pending.take() {
            (e, fire - &t)
        } else {
            let mut enabled: Vec<(usize, Rational)> = Vec::new();
            for (i, e) in ha.edges.iter().enumerate().filter(|(_, e)| e.from == loc) {
                let g = e.guard.interval(&v, rates);
                if g.is_empty() {
                    continue;
                }
                if g.lo_open {
                    return Err(HaError::StrictGuard { edge: e.label.clone(), time: t.clone() });
                }
                if inv.contains(&g.lo) || (tolerant && g.lo.is_zero()) {
                    enabled.push((i, g.lo));
                }
            }
            let Some(first) = enabled.iter().map(|(_, at)| at.clone()).min() else {
                let expires = inv.hi.clone().filter(|h| &(&t + h) < horizon);
                if let Some(h) = expires {
                    if !tolerant {
                        return Err(HaError::Deadlock { location: here.name.clone(), time: &t + &h });
                    }
                }
                flow(&mut out, here, &v, &t, horizon);
                if tolerant && !inv.contains(&(horizon - &t)) {
                    let at = inv.hi.clone().unwrap_or_else(Rational::zero);
                    violate(&mut out, loc, &(&t + &at), &advance(&v, rates, &at))?;
                }
                v = advance(&v, rates, &(horizon - &t));
                break;
            };
            let mut tied: Vec<usize> = enabled.iter().filter(|(_, at)| *at == first).map(|(i, _)| *i).collect();
            let best = tied.iter().map(|i| ha.edges[*i].priority).max().flatten();
            tied.retain(|i| ha.edges[*i].priority == best);
            if tied.len() > 1 {
                return Err(HaError::Nondeterminism {
                    location: here.name.clone(),
                    time: &t + &first,
                    edges: tied.iter().map(|i| ha.edges[*i].label.clone()).collect(),
                });
            }
            let e = tied[0];
            match (&delay, ha.edges[e].controller) {
                (Some(d), true) => (e, first + d),
                _ => (e, first),
            }
        };
        if &(&t + &at) > horizon {
            flow(&mut out, here, &v, &t, horizon);
            v = advance(&v, rates, &(horizon - &t));
            break;
        }
        if at.is_positive() {
            flow(&mut out, here, &v, &t, &(&t + &at));
            if tolerant && !inv.contains(&at) {
                let first_bad = inv.hi.clone().unwrap_or_else(Rational::zero);
                violate(&mut out, loc, &(&t + &first_bad), &advance(&v, rates, &first_bad))?;
            }
            v = advance(&v, rates, &at);
            t = &t + &at;
            steps_here = 0;
        }
        let e = &ha.edges[edge];
        for (k, x) in &e.reset {
            v.insert(k.clone(), x.clone());
        }
        loc = e.to;
        out.switches.push(Switch {
            time: t.clone(),
            edge: e.label.clone(),
            from: here.name.clone(),
            to: ha.locations[loc].name.clone(),
            values: v.clone(),
        });
        steps_here += 1;
        if steps_here > MAX_INSTANT_STEPS {
            return Err(HaError::Zeno { time: t });
        }
        if !ha.locations[loc].invariant.holds(&v) {
            violate(&mut out, loc, &t, &v)?;
        }
        if &t == horizon {
            break;
        }
    }
    out.final_location = ha.locations[loc].name.clone();
    out.final_values = v;
    Ok(out)
}

fn flow(out: &mut HaTrace, here: &Location, v: &Valuation, start: &Rational, end: &Rational) {
    if end > start {
        out.segments.push(Segment {
            location: here.name.clone(),
            start: start.clone(),
            end: end.clone(),
            values: v.clone(),
            rates: here.rates.clone(),
        });
    }
}

/// Pairs of `(automaton variable, program variable)`.
pub type VarMap = BTreeMap<String, String>;

/// Parses `ha_var = program_var` lines (TOML key/value form).
pub fn parse_map(text: &str) -> Result<VarMap, HaError> {
    toml::from_str(text).map_err(|e| HaError::Map(e.message().to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GridRow {
    pub tick: u64,
    pub time: Rational,
    pub location: String,
    /// `(program, automaton)` per mapped automaton variable.
    pub values: BTreeMap<String, (Rational, Rational)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GridDivergence {
    pub tick: u64,
    pub time: Rational,
    pub variable: String,
    pub program: Rational,
    pub automaton: Rational,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub rows: Vec<GridRow>,
    pub first_divergence: Option<GridDivergence>,
    pub max_deviation: Rational,
    /// The automaton with urgent switching.
    pub ideal: HaTrace,
    /// The automaton with controller edges delayed by one reaction time.
    pub delayed: HaTrace,
}

/// Tabulates `program` and `ha` at every tick `n` (time `n·w`) up to
/// `horizon`. An empty `map` pairs variables that share a name.
pub fn compare(ha: &HybridAutomaton, program: &Trace, map: &VarMap, horizon: &Rational) -> Result<Comparison, HaError> {
    let first = program.records.first().ok_or_else(|| HaError::Map("empty program trace".into()))?;
    let map: VarMap = if map.is_empty() {
        ha.variables
            .iter()
            .filter(|v| first.conts.contains_key(*v))
            .map(|v| (v.clone(), v.clone()))
            .collect()
    } else {
        map.clone()
    };
    if map.is_empty() {
        return Err(HaError::Map("no variable is shared by the automaton and the program".into()));
    }
    for (h, p) in &map {
        if !ha.variables.contains(h) {
            return Err(HaError::Map(format!("`{h}` is not an automaton variable")));
        }
        if !first.conts.contains_key(p) {
            return Err(HaError::Map(format!("`{p}` is not a continuous variable of the program")));
        }
    }
    let ideal = simulate(ha, horizon, &SimOptions::default())?;
    let delayed = simulate(ha, horizon, &SimOptions { switch_delay: Some(program.wcrt.clone()) })?;
    let mut rows = Vec::new();
    let mut first_divergence = None;
    let mut max_deviation = Rational::zero();
    for rec in program.records.iter().filter(|r| &r.time <= horizon) {
        let Some((location, vals)) = ideal.state_at(&rec.time) else { break };
        let mut values = BTreeMap::new();
        for (h, p) in &map {
            let pv = rec.conts[p].clone();
            let hv = vals[h].clone();
            let dev = (&pv - &hv).abs();
            if dev > max_deviation {
                max_deviation = dev.clone();
            }
            if !dev.is_zero() && first_divergence.is_none() {
                first_divergence = Some(GridDivergence {
                    tick: rec.tick,
                    time: rec.time.clone(),
                    variable: h.clone(),
                    program: pv.clone(),
                    automaton: hv.clone(),
                });
            }
            values.insert(h.clone(), (pv, hv));
        }
        rows.push(GridRow { tick: rec.tick, time: rec.time.clone(), location: location.to_string(), values });
    }
    Ok(Comparison { rows, first_divergence, max_deviation, ideal, delayed })
}

impl Comparison {
    pub fn to_csv(&self) -> String {
        let vars: Vec<&String> = self.rows.first().map(|r| r.values.keys().collect()).unwrap_or_default();
        let mut out = String::from("tick,time,location");
        for v in &vars {
            out.push_str(&format!(",{v}.program,{v}.automaton"));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{},{}", r.tick, r.time, r.location));
            for v in &vars {
                let (p, h) = &r.values[*v];
                out.push_str(&format!(",{p},{h}"));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAROUSEL: &str = include_str!("../../corpus/fig01b.toml");

    fn r(n: i64) -> Rational {
        Rational::from(n)
    }

    fn carousel(alpha: i64) -> HybridAutomaton {
        HybridAutomaton::from_toml(CAROUSEL, &BTreeMap::from([("alpha".into(), r(alpha))])).unwrap()
    }

    #[test]
    fn single_location_flows_to_the_horizon() {
        let ha = HybridAutomaton::from_toml(
            "variables = [\"x\"]\ninitial = \"A\"\n[[location]]\nname = \"A\"\nrates = { x = \"1\" }\n",
            &BTreeMap::new(),
        )
        .unwrap();
        let t = simulate(&ha, &r(5), &SimOptions::default()).unwrap();
        assert_eq!(t.final_values["x"], r(5));
        assert_eq!(t.value_at("x", &Rational::new(5, 2)), Some(Rational::new(5, 2)));
        assert!(t.switches.is_empty());
    }

    #[test]
    fn ideal_carousel_reaches_d_at_nine() {
        let t = simulate(&carousel(3), &r(20), &SimOptions::default()).unwrap();
        let d = t.entries("D").next().unwrap();
        assert_eq!((d.time.clone(), d.values["x"].clone()), (r(9), r(9)));
        assert!(t.violations.is_empty());
        // back in A with both variables reset when x reaches beta
        let a = t.entries("A").next().unwrap();
        assert_eq!(a.time, r(10));
        assert_eq!(t.value_at("x", &r(10)), Some(r(0)));
        assert_eq!(t.value_at("x", &r(12)), Some(r(2)));
    }

    #[test]
    fn delayed_controller_overshoots_to_eleven() {
        let opts = SimOptions { switch_delay: Some(r(2)) };
        let t = simulate(&carousel(3), &r(20), &opts).unwrap();
        let b = t.entries("B").next().unwrap();
        assert_eq!(b.values["x"], r(5));
        let d = t.entries("D").next().unwrap();
        assert_eq!(d.values["x"], r(11));
        // entering D past beta breaks its invariant; A's broke during the delay
        let broken: Vec<&str> = t.violations.iter().map(|v| v.location.as_str()).collect();
        assert_eq!(&broken[..2], ["A", "D"]);
        assert_eq!(t.violations[0].time, r(3));
    }

    #[test]
    fn detects_deadlock_nondeterminism_and_strict_guards() {
        let base = "variables = [\"x\"]\ninitial = \"A\"\n[[location]]\nname = \"A\"\nrates = { x = \"1\" }\ninvariant = \"x <= 2\"\n[[location]]\nname = \"B\"\n";
        let dead = HybridAutomaton::from_toml(base, &BTreeMap::new()).unwrap();
        assert!(matches!(simulate(&dead, &r(5), &SimOptions::default()), Err(HaError::Deadlock { .. })));
        let two = format!("{base}[[edge]]\nfrom = \"A\"\nto = \"B\"\nguard = \"x >= 1\"\n[[edge]]\nfrom = \"A\"\nto = \"B\"\nguard = \"x >= 1\"\n");
        let ha = HybridAutomaton::from_toml(&two, &BTreeMap::new()).unwrap();
        assert!(matches!(simulate(&ha, &r(5), &SimOptions::default()), Err(HaError::Nondeterminism { .. })));
        let ranked = format!("{two}priority = 1\n");
        let ha = HybridAutomaton::from_toml(&ranked, &BTreeMap::new()).unwrap();
        assert_eq!(simulate(&ha, &r(5), &SimOptions::default()).unwrap().switches.len(), 1);
        let strict = format!("{base}[[edge]]\nfrom = \"A\"\nto = \"B\"\nguard = \"x > 1\"\n");
        let ha = HybridAutomaton::from_toml(&strict, &BTreeMap::new()).unwrap();
        assert!(matches!(simulate(&ha, &r(5), &SimOptions::default()), Err(HaError::StrictGuard { .. })));
        assert!(matches!(
            HybridAutomaton::from_toml(&format!("{base}[[edge]]\nfrom = \"A\"\nto = \"Z\"\n"), &BTreeMap::new()),
            Err(HaError::Unknown { .. })
        ));
    }

    #[test]
    fn identical_systems_do_not_diverge() {
        let ha = carousel(3);
        let ideal = simulate(&ha, &r(8), &SimOptions::default()).unwrap();
        let mut trace = Trace::new(r(1));
        for n in 0..=8 {
            let mut rec = crate::trace::TickRecord {
                tick: n,
                time: r(n as i64),
                statuses: BTreeMap::new(),
                values: BTreeMap::new(),
                conts: BTreeMap::new(),
                labels: BTreeMap::new(),
            };
            for var in ["x", "y"] {
                rec.conts.insert(var.into(), ideal.value_at(var, &r(n as i64)).unwrap());
            }
            trace.records.push(rec);
        }
        let cmp = compare(&ha, &trace, &VarMap::new(), &r(8)).unwrap();
        assert_eq!(cmp.first_divergence, None);
        assert_eq!(cmp.max_deviation, r(0));
        assert_eq!(cmp.rows.len(), 9);
        let bad = VarMap::from([("z".to_string(), "x".to_string())]);
        assert!(matches!(compare(&ha, &trace, &bad, &r(8)), Err(HaError::Map(_))));
    }
}
