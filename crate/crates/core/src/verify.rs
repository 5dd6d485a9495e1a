//! Bounded explicit-state reachability of a signal emission.
//!
//! The kernel is deterministic, so the only branching comes from inputs.
//! Each tick, every combination allowed by the [`InputAlphabet`] is tried;
//! settled states are fingerprinted and a state already reached at the
//! same or a smaller depth is not expanded again. Breadth-first search
//! expands each depth level in parallel and merges the results in input
//! order, so the reported witness is the shortest one and, among those,
//! the first in lexicographic schedule order, independently of the number
//! of worker threads. Verdicts are relative to the bound.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::kernel::{InputAssignment, Kernel, RuntimeError, Schedule, SlotId, SlotState, TickState};
use crate::rational::Rational;
use crate::syntax::{Name, SymbolKind};
use crate::trace::TickRecord;
use crate::value::Value;

pub type Fingerprint = [u8; 32];

/// One admissible choice for an input in one tick.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InputChoice {
    Absent,
    Present,
    Valued(Value),
}

/// Finite per-tick choices for each input; inputs not listed stay absent.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputAlphabet {
    pub signals: BTreeMap<Name, Vec<InputChoice>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("target `{0}` is not a declared signal")]
    UnknownTarget(String),
    #[error("alphabet: {0}")]
    Alphabet(String),
    #[error("tick {tick}: {error} (schedule {schedule})")]
    Runtime {
        tick: u64,
        error: Box<RuntimeError>,
        schedule: String,
    },
}

impl InputAlphabet {
    /// No free inputs: a closed system.
    pub fn closed() -> Self {
        Self::default()
    }

    /// Every declared input may be absent or present, without values.
    pub fn presence_of_all(kernel: &Kernel) -> Self {
        let signals = kernel
            .inputs()
            .into_iter()
            .map(|s| (s.display.clone(), vec![InputChoice::Absent, InputChoice::Present]))
            .collect();
        InputAlphabet { signals }
    }

    /// Parses `{"FAULT": ["absent", "present"], "S": ["absent", "3/2"]}`.
    pub fn from_json(text: &str) -> Result<Self, VerifyError> {
        let raw: BTreeMap<Name, Vec<serde_json::Value>> =
            serde_json::from_str(text).map_err(|e| VerifyError::Alphabet(e.to_string()))?;
        let mut signals = BTreeMap::new();
        for (name, choices) in raw {
            let mut out = Vec::new();
            for c in choices {
                let choice = match &c {
                    serde_json::Value::String(s) if s == "absent" => InputChoice::Absent,
                    serde_json::Value::String(s) if s == "present" => InputChoice::Present,
                    serde_json::Value::String(s) if s == "true" || s == "false" => {
                        InputChoice::Valued(Value::Bool(s == "true"))
                    }
                    serde_json::Value::Bool(b) => InputChoice::Valued(Value::Bool(*b)),
                    serde_json::Value::String(s) => InputChoice::Valued(Value::Num(
                        s.parse::<Rational>().map_err(|e| VerifyError::Alphabet(e.to_string()))?,
                    )),
                    serde_json::Value::Number(n) => InputChoice::Valued(Value::Num(
                        n.to_string()
                            .parse::<Rational>()
                            .map_err(|e| VerifyError::Alphabet(e.to_string()))?,
                    )),
                    other => return Err(VerifyError::Alphabet(format!("bad choice {other} for `{name}`"))),
                };
                out.push(choice);
            }
            signals.insert(name, out);
        }
        Ok(InputAlphabet { signals })
    }

    /// Checks the alphabet against the program and returns the per-tick
    /// input assignments in exploration order: absent before present,
    /// values in the order given, signals in name order.
    pub fn assignments(&self, kernel: &Kernel) -> Result<Vec<InputAssignment>, VerifyError> {
        let mut out = vec![InputAssignment::absent()];
        for (name, choices) in &self.signals {
            if choices.is_empty() {
                return Err(VerifyError::Alphabet(format!("no choices for `{name}`")));
            }
            let mut next = Vec::with_capacity(out.len() * choices.len());
            for prefix in &out {
                for c in choices {
                    let a = match c {
                        InputChoice::Absent => prefix.clone(),
                        InputChoice::Present => prefix.clone().present(name.clone()),
                        InputChoice::Valued(v) => prefix.clone().valued(name.clone(), v.clone()),
                    };
                    next.push(a);
                }
            }
            out = next;
        }
        for a in &out {
            kernel
                .validate_inputs(a)
                .map_err(|e| VerifyError::Alphabet(e.to_string()))?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Shortest, lexicographically first witness.
    #[default]
    Bfs,
    /// Lower memory; the witness need not be the shortest.
    Dfs,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchOptions {
    pub strategy: Strategy,
    /// Maximum number of distinct states to expand.
    pub node_limit: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            strategy: Strategy::Bfs,
            node_limit: 1_000_000,
        }
    }
}

/// A schedule driving the program to emit the target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    /// Inputs for ticks 1.., trailing all-absent ticks removed.
    pub schedule: Schedule,
    /// Tick whose settled state has the target present.
    pub tick: u64,
    pub state: TickRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Reachable(Witness),
    /// No schedule of at most `bound` ticks emits the target.
    Unreachable { bound: u64, states: usize },
    /// The node limit was hit before the search completed.
    ResourceLimit { states: usize },
}

impl Verdict {
    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::Reachable(w) => Some(w),
            _ => None,
        }
    }
}

/// Digest of a settled state: the live slots and the control residue.
/// Slots whose declaration is not active are reset before they can be
/// read again, so they are left out.
pub fn fingerprint(kernel: &Kernel, state: &TickState) -> Fingerprint {
    let live: Vec<(SlotId, &SlotState)> = kernel
        .live_slots(state)
        .into_iter()
        .map(|s| (s, &state.slots[s.index()]))
        .collect();
    let bytes = serde_json::to_vec(&(&live, &state.control)).expect("state serialises");
    Sha256::digest(&bytes).into()
}

pub fn to_hex(fp: &Fingerprint) -> String {
    fp.iter().map(|b| format!("{b:02x}")).collect()
}

struct Node {
    state: TickState,
    /// Index of the input assignment taken at each tick.
    path: Vec<usize>,
}

fn schedule_of(path: &[usize], choices: &[InputAssignment]) -> Schedule {
    Schedule(path.iter().map(|i| choices[*i].clone()).collect()).trimmed()
}

fn target_slot(kernel: &Kernel, target: &str) -> Result<SlotId, VerifyError> {
    kernel
        .ir()
        .slot_by_display(target)
        .filter(|s| kernel.ir().slot(*s).kind != SymbolKind::Cont)
        .ok_or_else(|| VerifyError::UnknownTarget(target.into()))
}

type Expansion = Vec<Result<(usize, TickState), (usize, RuntimeError)>>;

fn expand(kernel: &Kernel, state: &TickState, choices: &[InputAssignment]) -> Expansion {
    choices
        .iter()
        .enumerate()
        .map(|(i, a)| kernel.tick(state, a).map(|s| (i, s.state)).map_err(|e| (i, e)))
        .collect()
}

/// Searches for a schedule of at most `bound` ticks under which `target`
/// settles present.
pub fn check_reachable(
    kernel: &Kernel,
    alphabet: &InputAlphabet,
    bound: u64,
    target: &str,
    opts: &SearchOptions,
) -> Result<Verdict, VerifyError> {
    let slot = target_slot(kernel, target)?;
    let choices = alphabet.assignments(kernel)?;
    match opts.strategy {
        Strategy::Bfs => bfs(kernel, &choices, bound, slot, opts.node_limit),
        Strategy::Dfs => dfs(kernel, &choices, bound, slot, opts.node_limit),
    }
}

fn witness(kernel: &Kernel, path: Vec<usize>, state: &TickState, choices: &[InputAssignment]) -> Verdict {
    // Replaying yields the record with label activity of the last tick.
    let schedule = schedule_of(&path, choices);
    let tick = state.tick;
    let record = kernel
        .run(&schedule, tick)
        .ok()
        .and_then(|t| t.record(tick).cloned())
        .unwrap_or_else(|| kernel.record(state, &[]));
    Verdict::Reachable(Witness {
        schedule,
        tick,
        state: record,
    })
}

fn runtime_error(tick: u64, error: RuntimeError, path: &[usize], choices: &[InputAssignment]) -> VerifyError {
    VerifyError::Runtime {
        tick,
        error: Box::new(error),
        schedule: schedule_of(path, choices).to_json(),
    }
}

fn bfs(
    kernel: &Kernel,
    choices: &[InputAssignment],
    bound: u64,
    target: SlotId,
    node_limit: usize,
) -> Result<Verdict, VerifyError> {
    let init = kernel.init();
    let mut seen: HashMap<Fingerprint, ()> = HashMap::new();
    seen.insert(fingerprint(kernel, &init), ());
    let mut frontier = vec![Node {
        state: init,
        path: Vec::new(),
    }];
    for depth in 1..=bound {
        let expanded: Vec<Expansion> = frontier
            .par_iter()
            .map(|n| {
                if n.state.is_terminated() {
                    Vec::new()
                } else {
                    expand(kernel, &n.state, choices)
                }
            })
            .collect();
        let mut next = Vec::new();
        for (parent, succs) in frontier.iter().zip(expanded) {
            for r in succs {
                let (choice, state) =
                    r.map_err(|(i, e)| runtime_error(depth, e, &[parent.path.clone(), vec![i]].concat(), choices))?;
                let mut path = parent.path.clone();
                path.push(choice);
                if state.slots[target.index()].status {
                    return Ok(witness(kernel, path, &state, choices));
                }
                if seen.insert(fingerprint(kernel, &state), ()).is_none() {
                    if seen.len() > node_limit {
                        return Ok(Verdict::ResourceLimit { states: seen.len() });
                    }
                    next.push(Node { state, path });
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(Verdict::Unreachable {
        bound,
        states: seen.len(),
    })
}

fn dfs(
    kernel: &Kernel,
    choices: &[InputAssignment],
    bound: u64,
    target: SlotId,
    node_limit: usize,
) -> Result<Verdict, VerifyError> {
    // A state is re-expanded only when reached at a smaller depth, which
    // keeps the verdict exact for the bound.
    let init = kernel.init();
    let mut best: HashMap<Fingerprint, u64> = HashMap::new();
    best.insert(fingerprint(kernel, &init), 0);
    let mut stack = vec![Node {
        state: init,
        path: Vec::new(),
    }];
    while let Some(node) = stack.pop() {
        let depth = node.path.len() as u64;
        if depth >= bound || node.state.is_terminated() {
            continue;
        }
        let succs = expand(kernel, &node.state, choices);
        let mut children = Vec::new();
        for r in succs {
            let (choice, state) =
                r.map_err(|(i, e)| runtime_error(depth + 1, e, &[node.path.clone(), vec![i]].concat(), choices))?;
            let mut path = node.path.clone();
            path.push(choice);
            if state.slots[target.index()].status {
                return Ok(witness(kernel, path, &state, choices));
            }
            let fp = fingerprint(kernel, &state);
            let fresh = best.get(&fp).is_none_or(|d| *d > depth + 1);
            if fresh {
                best.insert(fp, depth + 1);
                if best.len() > node_limit {
                    return Ok(Verdict::ResourceLimit { states: best.len() });
                }
                children.push(Node { state, path });
            }
        }
        // Push in reverse so the first choice is explored first.
        stack.extend(children.into_iter().rev());
    }
    Ok(Verdict::Unreachable {
        bound,
        states: best.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewrite::RewriteConfig;
    use crate::syntax::parse;

    fn kernel(src: &str) -> Kernel {
        Kernel::new(&parse(src).unwrap(), &RewriteConfig::new(Rational::one()).unwrap()).unwrap()
    }

    #[test]
    fn immediate_emission() {
        let k = kernel("signal ERROR; emit ERROR");
        let v = check_reachable(&k, &InputAlphabet::closed(), 5, "ERROR", &SearchOptions::default()).unwrap();
        let w = v.witness().unwrap();
        assert_eq!(w.tick, 1);
        assert!(w.schedule.0.is_empty());
    }

    #[test]
    fn input_driven_witness_is_shortest() {
        let src = "input signal I; signal E; loop { if (I) emit E; pause }";
        let k = kernel(src);
        let alpha = InputAlphabet::presence_of_all(&k);
        for strategy in [Strategy::Bfs, Strategy::Dfs] {
            let opts = SearchOptions {
                strategy,
                ..Default::default()
            };
            let w = check_reachable(&k, &alpha, 5, "E", &opts).unwrap();
            let w = w.witness().unwrap().clone();
            // inputs latched at the end of tick 1 are seen by tick 2
            if strategy == Strategy::Bfs {
                assert_eq!(w.tick, 2);
                assert_eq!(w.schedule.0.len(), 1);
            }
            let trace = k.run(&w.schedule, w.tick).unwrap();
            assert_eq!(trace.status("E", w.tick), Some(true));
        }
        let v = check_reachable(&k, &alpha, 1, "E", &SearchOptions::default()).unwrap();
        assert!(matches!(v, Verdict::Unreachable { bound: 1, .. }));
    }

    #[test]
    fn fingerprints() {
        let k = kernel("cont a = 0; loop { a = a + 1; pause }");
        assert_eq!(fingerprint(&k, &k.init()), fingerprint(&k, &k.init()));
        let s1 = k.tick(&k.init(), &InputAssignment::absent()).unwrap().state;
        let s2 = k.tick(&s1, &InputAssignment::absent()).unwrap().state;
        assert_ne!(fingerprint(&k, &s1), fingerprint(&k, &s2));
        assert_eq!(to_hex(&fingerprint(&k, &s1)).len(), 64);
    }

    #[test]
    fn node_limit_and_bad_targets() {
        let k = kernel("cont a = 0; signal E; loop { a = a + 1; pause }");
        let opts = SearchOptions {
            node_limit: 3,
            ..Default::default()
        };
        let v = check_reachable(&k, &InputAlphabet::closed(), 50, "E", &opts).unwrap();
        assert!(matches!(v, Verdict::ResourceLimit { .. }));
        assert!(matches!(
            check_reachable(&k, &InputAlphabet::closed(), 5, "a", &opts),
            Err(VerifyError::UnknownTarget(_))
        ));
        let bad = InputAlphabet::from_json(r#"{"X": ["present"]}"#).unwrap();
        assert!(matches!(
            check_reachable(&k, &bad, 5, "E", &opts),
            Err(VerifyError::Alphabet(_))
        ));
    }
}
