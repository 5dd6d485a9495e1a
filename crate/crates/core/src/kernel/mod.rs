//! Tick-accurate execution under delayed synchronous semantics.
//!
//! Every read during a reaction sees the state settled at the end of the
//! previous tick; emissions and writes are buffered and settle together
//! at the end of the tick, several writes to one slot being folded with
//! its combine operator. Preemption guards are evaluated against the same
//! snapshot, and a non-immediate guard is never evaluated on the tick its
//! body is entered. Inputs given for tick `n` are latched at the end of
//! reaction `n` and are therefore visible to reaction `n + 1`.
//!
//! Storage is allocated per declaration site. Entering a declaration
//! resets its slot, so a loop re-entering a local signal sees a fresh one.

mod compile;
mod exec;
mod schedule;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use compile::{Ir, SlotId, SlotInfo};
pub use exec::{fold_writes, FoldError, Read, ReadKind, Res, SlotState};
pub use schedule::{InputAssignment, Schedule, ScheduleError};

use crate::rational::Rational;
use crate::rewrite::{rewrite_flows, RewriteConfig};
use crate::syntax::{reject_nonlinear_combine, CombineError, Direction, Name, Program, SymbolKind, ValueType};
use crate::trace::{TickRecord, Trace};
use crate::value::Value;
use exec::{Out, Reaction};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Combine(#[from] CombineError),
    #[error("program still contains a flow action; rewrite it first or run flows natively")]
    FlowNotRewritten,
    #[error("initialiser of `{name}` is not a constant")]
    NonConstantInit { name: Name },
    #[error("name `{name}` does not resolve")]
    Unresolved { name: Name },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("`{name}` written more than once in a tick but declared without a combine operator")]
    MultipleWrites { name: Name },
    #[error("`{name}` has boolean writes that cannot be combined")]
    CombineType { name: Name },
    #[error("loop body terminated in the same tick it was started")]
    InstantaneousLoop,
    #[error("evaluation error: {msg}")]
    Operand { msg: String },
    #[error("look-ahead error: {msg}")]
    Ttl { msg: String },
    #[error("`{name}` is not an input signal")]
    UnknownInput { name: Name },
    #[error("input `{name}` is a pure signal and cannot carry a value")]
    ValueOnPure { name: Name },
    #[error("input `{name}` expects a {expected} value, got {got}")]
    InputType {
        name: Name,
        expected: &'static str,
        got: Value,
    },
    #[error("program has already terminated")]
    Terminated,
}

/// A runtime error with the tick it happened in.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("tick {tick}: {error}")]
pub struct RunError {
    pub tick: u64,
    pub error: RuntimeError,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Control {
    /// Not started yet.
    Start,
    Paused(Res),
    Terminated,
}

/// Settled machine state between two ticks. Pending buffers are empty at
/// this point by construction, so they are not part of the state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TickState {
    /// Number of ticks executed so far.
    pub tick: u64,
    pub slots: Vec<SlotState>,
    pub control: Control,
}

impl TickState {
    pub fn is_terminated(&self) -> bool {
        self.control == Control::Terminated
    }
}

/// Result of one reaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub state: TickState,
    pub record: TickRecord,
    /// Reads performed during the reaction, when requested.
    pub reads: Vec<Read>,
}

/// A compiled program ready to run.
#[derive(Debug, Clone)]
pub struct Kernel {
    ir: Ir,
    cfg: RewriteConfig,
    native: bool,
}

impl Kernel {
    /// Checks combine operators, rewrites every flow action and compiles.
    pub fn new(program: &Program, cfg: &RewriteConfig) -> Result<Self, CompileError> {
        reject_nonlinear_combine(program)?;
        let rewritten = rewrite_flows(program, cfg);
        Self::from_rewritten(&rewritten, cfg)
    }

    /// Compiles a program that must not contain flow actions.
    pub fn from_rewritten(program: &Program, cfg: &RewriteConfig) -> Result<Self, CompileError> {
        Ok(Kernel {
            ir: compile::lower(program, false)?,
            cfg: cfg.clone(),
            native: false,
        })
    }

    /// Compiles a program keeping its flow actions, which are then
    /// interpreted directly instead of through their rewrite.
    pub fn native(program: &Program, cfg: &RewriteConfig) -> Result<Self, CompileError> {
        reject_nonlinear_combine(program)?;
        Ok(Kernel {
            ir: compile::lower(program, true)?,
            cfg: cfg.clone(),
            native: true,
        })
    }

    pub fn ir(&self) -> &Ir {
        &self.ir
    }

    pub fn config(&self) -> &RewriteConfig {
        &self.cfg
    }

    pub fn is_native(&self) -> bool {
        self.native
    }

    pub fn slots(&self) -> &[SlotInfo] {
        &self.ir.slots
    }

    /// Display names of the declared input signals.
    pub fn inputs(&self) -> Vec<&SlotInfo> {
        self.ir
            .slots
            .iter()
            .filter(|s| s.direction == Some(Direction::Input))
            .collect()
    }

    pub fn outputs(&self) -> Vec<&SlotInfo> {
        self.ir
            .slots
            .iter()
            .filter(|s| s.direction == Some(Direction::Output))
            .collect()
    }

    pub fn init(&self) -> TickState {
        TickState {
            tick: 0,
            slots: self
                .ir
                .slots
                .iter()
                .map(|s| SlotState {
                    status: false,
                    value: s.init.clone(),
                })
                .collect(),
            control: Control::Start,
        }
    }

    /// Slots whose declaration is active in the state's control residue.
    pub fn live_slots(&self, state: &TickState) -> Vec<SlotId> {
        let mut out = Vec::new();
        if let Control::Paused(r) = &state.control {
            r.live_decls(&self.ir, &mut |s| out.push(s));
        }
        out.sort();
        out.dedup();
        out
    }

    /// Checks an input assignment against the declared inputs.
    pub fn validate_inputs(&self, inputs: &InputAssignment) -> Result<(), RuntimeError> {
        for name in inputs.signals() {
            self.input_slot(name)?;
        }
        for (name, v) in &inputs.values {
            let slot = self.ir.slot(self.input_slot(name)?);
            let ty = match slot.kind {
                SymbolKind::ValuedSignal(t) => t,
                _ => return Err(RuntimeError::ValueOnPure { name: name.clone() }),
            };
            let ok = match (ty, v) {
                (ValueType::Boolean, Value::Bool(_)) => true,
                (ValueType::Ratio, Value::Num(_)) => true,
                (ValueType::Integer, Value::Num(n)) => n.is_integer(),
                _ => false,
            };
            if !ok {
                return Err(RuntimeError::InputType {
                    name: name.clone(),
                    expected: ty.keyword(),
                    got: v.clone(),
                });
            }
        }
        Ok(())
    }

    fn input_slot(&self, name: &str) -> Result<SlotId, RuntimeError> {
        self.ir
            .slot_by_display(name)
            .filter(|s| self.ir.slot(*s).direction == Some(Direction::Input))
            .ok_or_else(|| RuntimeError::UnknownInput { name: name.into() })
    }

    /// Runs one reaction.
    pub fn tick(&self, state: &TickState, inputs: &InputAssignment) -> Result<Step, RuntimeError> {
        self.step(state, inputs, false)
    }

    /// Like [`Kernel::tick`], also returning every read the reaction made.
    pub fn tick_logged(&self, state: &TickState, inputs: &InputAssignment) -> Result<Step, RuntimeError> {
        self.step(state, inputs, true)
    }

    fn step(&self, state: &TickState, inputs: &InputAssignment, log: bool) -> Result<Step, RuntimeError> {
        self.validate_inputs(inputs)?;
        let mut rx = Reaction::new(&self.ir, &self.cfg.wcrt, self.cfg.ttl_mode, state.slots.clone(), log);
        let out = match &state.control {
            Control::Start => rx.start(self.ir.root)?,
            Control::Paused(r) => rx.resume(r.clone())?,
            Control::Terminated => return Err(RuntimeError::Terminated),
        };
        for name in inputs.signals() {
            let slot = self.input_slot(name)?;
            rx.pending[slot.index()].status = true;
        }
        for (name, v) in &inputs.values {
            let slot = self.input_slot(name)?;
            rx.pending[slot.index()].writes.push(v.clone());
        }
        let (slots, fired, reads) = rx.settle()?;
        let next = TickState {
            tick: state.tick + 1,
            slots,
            control: match out {
                Out::Done => Control::Terminated,
                Out::Paused(r) => Control::Paused(r),
            },
        };
        let record = self.record(&next, &fired);
        Ok(Step {
            state: next,
            record,
            reads: reads.unwrap_or_default(),
        })
    }

    /// Snapshot of a settled state; `fired` flags the labels active in
    /// the reaction that produced it.
    pub fn record(&self, state: &TickState, fired: &[bool]) -> TickRecord {
        let mut statuses = BTreeMap::new();
        let mut values = BTreeMap::new();
        let mut conts = BTreeMap::new();
        for (info, s) in self.ir.slots.iter().zip(&state.slots) {
            match info.kind {
                SymbolKind::Cont => {
                    if let Value::Num(n) = &s.value {
                        conts.insert(info.display.clone(), n.clone());
                    }
                }
                SymbolKind::PureSignal => {
                    statuses.insert(info.display.clone(), s.status);
                }
                SymbolKind::ValuedSignal(_) => {
                    statuses.insert(info.display.clone(), s.status);
                    values.insert(info.display.clone(), s.value.clone());
                }
            }
        }
        let labels = self
            .ir
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), fired.get(i).copied().unwrap_or(false)))
            .collect();
        TickRecord {
            tick: state.tick,
            time: Rational::from(state.tick as i64) * &self.cfg.wcrt,
            statuses,
            values,
            conts,
            labels,
        }
    }

    /// Runs from the initial state until termination or `max_ticks`
    /// reactions, feeding `schedule` (absent inputs past its end).
    pub fn run(&self, schedule: &Schedule, max_ticks: u64) -> Result<Trace, RunError> {
        let mut trace = Trace::new(self.cfg.wcrt.clone());
        let mut state = self.init();
        trace.records.push(self.record(&state, &[]));
        let absent = InputAssignment::absent();
        while state.tick < max_ticks && !state.is_terminated() {
            let inputs = schedule.at(state.tick + 1).unwrap_or(&absent);
            let step = self.tick(&state, inputs).map_err(|error| RunError {
                tick: state.tick + 1,
                error,
            })?;
            state = step.state;
            trace.records.push(step.record);
            if state.is_terminated() {
                trace.terminated_at = Some(state.tick - 1);
            }
        }
        Ok(trace)
    }
}

/// Parses, rewrites and runs a source text in one go.
pub fn run_source(
    source: &str,
    params: &BTreeMap<String, Rational>,
    cfg: &RewriteConfig,
    schedule: &Schedule,
    max_ticks: u64,
) -> Result<Trace, Box<dyn std::error::Error + Send + Sync>> {
    let program = crate::syntax::parse_with_params(source, params)?;
    let kernel = Kernel::new(&program, cfg)?;
    Ok(kernel.run(schedule, max_ticks)?)
}
