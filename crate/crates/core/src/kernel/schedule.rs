//! Per-tick input assignments and the JSON schedule format
//! `[{"tick": 1, "present": ["FAULT"], "values": {"S": "3/2"}}]`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;
use crate::syntax::Name;
use crate::value::Value;

/// Inputs captured at the start of one tick. A value on an input implies
/// the input is present.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InputAssignment {
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub present: BTreeSet<Name>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<Name, Value>,
}

impl InputAssignment {
    pub fn absent() -> Self {
        Self::default()
    }

    pub fn present(mut self, name: impl Into<Name>) -> Self {
        self.present.insert(name.into());
        self
    }

    pub fn valued(mut self, name: impl Into<Name>, v: impl Into<Value>) -> Self {
        let name = name.into();
        self.present.insert(name.clone());
        self.values.insert(name, v.into());
        self
    }

    pub fn is_empty(&self) -> bool {
        self.present.is_empty() && self.values.is_empty()
    }

    /// Every signal this assignment mentions.
    pub fn signals(&self) -> impl Iterator<Item = &Name> {
        self.present.iter().chain(self.values.keys())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("malformed schedule: {0}")]
    Malformed(String),
    #[error("tick {tick} appears more than once in the schedule")]
    DuplicateTick { tick: u64 },
    #[error("ticks are numbered from 1, found {tick}")]
    TickZero { tick: u64 },
    #[error("bad value `{text}` for `{signal}`")]
    BadValue { signal: Name, text: String },
}

/// Input assignments for ticks 1, 2, …; ticks past the end see all
/// inputs absent.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule(pub Vec<InputAssignment>);

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    tick: u64,
    #[serde(default)]
    present: Vec<Name>,
    #[serde(default)]
    values: BTreeMap<Name, serde_json::Value>,
}

#[derive(Serialize)]
struct EntryOut<'a> {
    tick: u64,
    #[serde(skip_serializing_if = "BTreeSet::is_empty")]
    present: &'a BTreeSet<Name>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    values: &'a BTreeMap<Name, Value>,
}

fn json_value(signal: &str, v: &serde_json::Value) -> Result<Value, ScheduleError> {
    let bad = || ScheduleError::BadValue {
        signal: signal.into(),
        text: v.to_string(),
    };
    match v {
        serde_json::Value::Bool(b) => Ok(Value::Bool(*b)),
        serde_json::Value::Number(n) => n.to_string().parse::<Rational>().map(Value::Num).map_err(|_| bad()),
        serde_json::Value::String(s) => match s.as_str() {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => s.parse::<Rational>().map(Value::Num).map_err(|_| bad()),
        },
        _ => Err(bad()),
    }
}

impl Schedule {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Inputs of tick `tick` (1-based).
    pub fn at(&self, tick: u64) -> Option<&InputAssignment> {
        let i = usize::try_from(tick.checked_sub(1)?).ok()?;
        self.0.get(i)
    }

    pub fn set(&mut self, tick: u64, inputs: InputAssignment) {
        assert!(tick >= 1, "ticks are numbered from 1");
        let i = (tick - 1) as usize;
        if self.0.len() <= i {
            self.0.resize(i + 1, InputAssignment::absent());
        }
        self.0[i] = inputs;
    }

    /// Drops trailing all-absent ticks.
    pub fn trimmed(mut self) -> Self {
        while self.0.last().is_some_and(InputAssignment::is_empty) {
            self.0.pop();
        }
        self
    }

    pub fn from_json(text: &str) -> Result<Self, ScheduleError> {
        let entries: Vec<Entry> =
            serde_json::from_str(text).map_err(|e| ScheduleError::Malformed(e.to_string()))?;
        let mut out = Schedule::empty();
        let mut seen = BTreeSet::new();
        for e in entries {
            if e.tick == 0 {
                return Err(ScheduleError::TickZero { tick: 0 });
            }
            if !seen.insert(e.tick) {
                return Err(ScheduleError::DuplicateTick { tick: e.tick });
            }
            let mut a = InputAssignment::absent();
            for p in e.present {
                a.present.insert(p);
            }
            for (k, v) in &e.values {
                a = a.valued(k.clone(), json_value(k, v)?);
            }
            out.set(e.tick, a);
        }
        Ok(out)
    }

    /// Sparse JSON form: only ticks with some input are listed.
    pub fn to_json(&self) -> String {
        let entries: Vec<EntryOut> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, a)| !a.is_empty())
            .map(|(i, a)| EntryOut {
                tick: i as u64 + 1,
                present: &a.present,
                values: &a.values,
            })
            .collect();
        serde_json::to_string(&entries).expect("schedule serialises")
    }
}
