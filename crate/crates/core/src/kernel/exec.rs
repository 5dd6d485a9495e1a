//! One reaction: resume the control residue against the settled snapshot,
//! collect emissions and writes, then settle them.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::compile::{Ir, KExpr, KNode, NodeId, SlotId};
use super::RuntimeError;
use crate::rational::Rational;
use crate::syntax::{apply_binop, apply_unop, CombineOp};
use crate::ttl::{predict, TtlError, TtlMode};
use crate::value::Value;

/// Settled slots, which slots fired, and the read log if one was kept.
pub type Settled = (Vec<SlotState>, Vec<bool>, Option<Vec<Read>>);

/// Where a paused program resumes. Each variant names the IR node it
/// belongs to, so residues of distinct statements never compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Res {
    Pause,
    Seq {
        node: NodeId,
        idx: usize,
        inner: Box<Res>,
    },
    /// `None` marks a branch that already terminated.
    Par {
        node: NodeId,
        left: Option<Box<Res>>,
        right: Option<Box<Res>>,
    },
    Loop {
        node: NodeId,
        inner: Box<Res>,
    },
    Abort {
        node: NodeId,
        inner: Box<Res>,
    },
    /// `inner: None`: an immediate suspend held on entry, body not started.
    Suspend {
        node: NodeId,
        inner: Option<Box<Res>>,
    },
    Decl {
        node: NodeId,
        inner: Box<Res>,
    },
    /// Natively run flow; `stop` is set when the last look-ahead failed, so
    /// the flow ends at the next resumption.
    Flow {
        node: NodeId,
        stop: bool,
    },
    Label {
        node: NodeId,
        inner: Box<Res>,
    },
}

impl Res {
    /// Calls `f` on every node id that is a live declaration.
    pub(crate) fn live_decls(&self, ir: &Ir, f: &mut impl FnMut(SlotId)) {
        match self {
            Res::Pause | Res::Flow { .. } => {}
            Res::Decl { node, inner } => {
                if let KNode::Decl { slot, .. } = ir.nodes[*node] {
                    f(slot);
                }
                inner.live_decls(ir, f);
            }
            Res::Seq { inner, .. }
            | Res::Loop { inner, .. }
            | Res::Abort { inner, .. }
            | Res::Label { inner, .. } => inner.live_decls(ir, f),
            Res::Suspend { inner, .. } => {
                if let Some(r) = inner {
                    r.live_decls(ir, f);
                }
            }
            Res::Par { left, right, .. } => {
                for r in [left, right].into_iter().flatten() {
                    r.live_decls(ir, f);
                }
            }
        }
    }

    /// A suspended tick emits nothing, so a pending flow stop (the flow's
    /// stop signal being visible next tick) is lost, exactly as for the
    /// rewritten loop's local signal.
    fn quiesce(&mut self) {
        match self {
            Res::Pause => {}
            Res::Flow { stop, .. } => *stop = false,
            Res::Seq { inner, .. }
            | Res::Loop { inner, .. }
            | Res::Abort { inner, .. }
            | Res::Decl { inner, .. }
            | Res::Label { inner, .. } => inner.quiesce(),
            Res::Suspend { inner, .. } => {
                if let Some(r) = inner {
                    r.quiesce();
                }
            }
            Res::Par { left, right, .. } => {
                for r in [left, right].into_iter().flatten() {
                    r.quiesce();
                }
            }
        }
    }
}

/// Settled datum of one slot between ticks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SlotState {
    pub status: bool,
    pub value: Value,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Pending {
    pub status: bool,
    pub writes: Vec<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadKind {
    Status,
    Value,
    Cont,
}

/// One read performed during a reaction, for the delayed-read check.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Read {
    pub slot: SlotId,
    pub kind: ReadKind,
    pub value: Value,
}

impl fmt::Display for SlotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub(crate) enum Out {
    Done,
    Paused(Res),
}

impl Out {
    fn wrap(self, f: impl FnOnce(Box<Res>) -> Res) -> Out {
        match self {
            Out::Done => Out::Done,
            Out::Paused(r) => Out::Paused(f(Box::new(r))),
        }
    }
}

pub(crate) struct Reaction<'a> {
    pub ir: &'a Ir,
    pub wcrt: &'a Rational,
    pub mode: TtlMode,
    pub slots: Vec<SlotState>,
    pub pending: Vec<Pending>,
    pub fired: Vec<bool>,
    pub reads: Option<Vec<Read>>,
}

impl<'a> Reaction<'a> {
    pub fn new(ir: &'a Ir, wcrt: &'a Rational, mode: TtlMode, slots: Vec<SlotState>, log_reads: bool) -> Self {
        Reaction {
            ir,
            wcrt,
            mode,
            pending: vec![Pending::default(); slots.len()],
            slots,
            fired: vec![false; ir.labels.len()],
            reads: log_reads.then(Vec::new),
        }
    }

    fn log(&mut self, slot: SlotId, kind: ReadKind, value: &Value) {
        if let Some(reads) = &mut self.reads {
            reads.push(Read {
                slot,
                kind,
                value: value.clone(),
            });
        }
    }

    fn cont_value(&mut self, slot: SlotId) -> Result<Rational, RuntimeError> {
        let v = self.slots[slot.index()].value.clone();
        self.log(slot, ReadKind::Cont, &v);
        match v {
            Value::Num(n) => Ok(n),
            Value::Bool(_) => Err(RuntimeError::Operand {
                msg: format!("`{}` is not numeric", self.ir.slot(slot).display),
            }),
        }
    }

    fn eval(&mut self, e: &KExpr, delta: Option<&BTreeMap<SlotId, Rational>>) -> Result<Value, RuntimeError> {
        Ok(match e {
            KExpr::Const(v) => v.clone(),
            KExpr::Status(s) => {
                let v = Value::Bool(self.slots[s.index()].status);
                self.log(*s, ReadKind::Status, &v);
                v
            }
            KExpr::Value(s) => {
                let v = self.slots[s.index()].value.clone();
                self.log(*s, ReadKind::Value, &v);
                v
            }
            KExpr::Cont(s) => match delta.and_then(|d| d.get(s)) {
                Some(predicted) => Value::Num(predicted.clone()),
                None => Value::Num(self.cont_value(*s)?),
            },
            KExpr::Unary(op, a) => {
                let a = self.eval(a, delta)?;
                apply_unop(*op, a).map_err(|e| RuntimeError::Operand { msg: e.to_string() })?
            }
            KExpr::Binary(op, a, b) => {
                let a = self.eval(a, delta)?;
                let b = self.eval(b, delta)?;
                apply_binop(*op, a, b).map_err(|e| RuntimeError::Operand { msg: e.to_string() })?
            }
            KExpr::Ttl(site) => {
                if delta.is_some() {
                    return Err(RuntimeError::Ttl {
                        msg: "look-ahead nested inside an invariant".into(),
                    });
                }
                Value::Bool(self.ttl(*site)?)
            }
        })
    }

    fn truth(&mut self, e: &KExpr) -> Result<bool, RuntimeError> {
        match self.eval(e, None)? {
            Value::Bool(b) => Ok(b),
            Value::Num(_) => Err(RuntimeError::Operand {
                msg: "condition is not boolean".into(),
            }),
        }
    }

    /// Look-ahead of one site against the settled snapshot.
    fn ttl(&mut self, site: usize) -> Result<bool, RuntimeError> {
        let ir = self.ir;
        let s = &ir.ttl_sites[site];
        let mut current = BTreeMap::new();
        for v in &s.vars {
            current.insert(*v, self.cont_value(*v)?);
        }
        let delta = predict(
            &s.odes,
            &s.vars,
            |v| ir.slot(*v).combine,
            |v| Ok(current[v].clone()),
            self.wcrt,
            self.mode,
        )
        .map_err(|e| self.ttl_error(e))?;
        match self.eval(&s.invariant, Some(&delta))? {
            Value::Bool(b) => Ok(b),
            Value::Num(_) => Err(RuntimeError::Ttl {
                msg: TtlError::NotBoolean.to_string(),
            }),
        }
    }

    fn ttl_error(&self, e: TtlError) -> RuntimeError {
        let name = |v: &str| {
            v.parse::<u32>()
                .ok()
                .and_then(|i| self.ir.slots.get(i as usize))
                .map_or_else(|| v.to_string(), |s| s.display.clone())
        };
        let e = match e {
            TtlError::MissingOde { var } => TtlError::MissingOde { var: name(&var) },
            TtlError::MultipleOdes { var } => TtlError::MultipleOdes { var: name(&var) },
            TtlError::MissingCombine { var } => TtlError::MissingCombine { var: name(&var) },
            other => other,
        };
        RuntimeError::Ttl { msg: e.to_string() }
    }

    /// One iteration of a native flow; returns whether it must stop.
    fn flow_iteration(&mut self, site: usize) -> Result<bool, RuntimeError> {
        let ir = self.ir;
        let s = &ir.ttl_sites[site];
        for (v, rate) in &s.odes {
            let next = self.cont_value(*v)? + rate * self.wcrt;
            self.pending[v.index()].writes.push(Value::Num(next));
        }
        if s.forever {
            return Ok(false);
        }
        Ok(!self.ttl(site)?)
    }

    fn reset(&mut self, slot: SlotId) {
        let info = self.ir.slot(slot);
        self.slots[slot.index()] = SlotState {
            status: false,
            value: info.init.clone(),
        };
        self.pending[slot.index()] = Pending::default();
    }

    fn seq_from(&mut self, node: NodeId, items: &[NodeId], from: usize) -> Result<Out, RuntimeError> {
        for (idx, item) in items.iter().enumerate().skip(from) {
            if let Out::Paused(r) = self.start(*item)? {
                return Ok(Out::Paused(Res::Seq {
                    node,
                    idx,
                    inner: Box::new(r),
                }));
            }
        }
        Ok(Out::Done)
    }

    fn par(node: NodeId, left: Out, right: Out) -> Out {
        let opt = |o: Out| match o {
            Out::Done => None,
            Out::Paused(r) => Some(Box::new(r)),
        };
        match (opt(left), opt(right)) {
            (None, None) => Out::Done,
            (left, right) => Out::Paused(Res::Par { node, left, right }),
        }
    }

    fn restart_loop(&mut self, node: NodeId, body: NodeId) -> Result<Out, RuntimeError> {
        match self.start(body)? {
            Out::Done => Err(RuntimeError::InstantaneousLoop),
            Out::Paused(r) => Ok(Out::Paused(Res::Loop {
                node,
                inner: Box::new(r),
            })),
        }
    }

    pub fn start(&mut self, id: NodeId) -> Result<Out, RuntimeError> {
        let ir = self.ir;
        Ok(match &ir.nodes[id] {
            KNode::Nothing => Out::Done,
            KNode::Pause => Out::Paused(Res::Pause),
            KNode::Emit(s) => {
                self.pending[s.index()].status = true;
                Out::Done
            }
            KNode::Write(s, e) | KNode::Assign(s, e) => {
                let v = self.eval(e, None)?;
                self.pending[s.index()].writes.push(v);
                Out::Done
            }
            KNode::Abort {
                immediate,
                guard,
                body,
            } => {
                if *immediate && self.truth(guard)? {
                    Out::Done
                } else {
                    self.start(*body)?.wrap(|inner| Res::Abort { node: id, inner })
                }
            }
            KNode::Suspend {
                immediate,
                guard,
                body,
            } => {
                if *immediate && self.truth(guard)? {
                    Out::Paused(Res::Suspend { node: id, inner: None })
                } else {
                    self.start(*body)?.wrap(|inner| Res::Suspend {
                        node: id,
                        inner: Some(inner),
                    })
                }
            }
            KNode::If { cond, then, els } => {
                let branch = if self.truth(cond)? { *then } else { *els };
                self.start(branch)?
            }
            KNode::Decl { slot, body } => {
                self.reset(*slot);
                self.start(*body)?.wrap(|inner| Res::Decl { node: id, inner })
            }
            KNode::Loop(body) => self.restart_loop(id, *body)?,
            KNode::Seq(items) => self.seq_from(id, items, 0)?,
            KNode::Par(a, b) => {
                let left = self.start(*a)?;
                let right = self.start(*b)?;
                Self::par(id, left, right)
            }
            KNode::Flow(site) => {
                let stop = self.flow_iteration(*site)?;
                Out::Paused(Res::Flow { node: id, stop })
            }
            KNode::Label { label, body } => {
                self.fired[*label] = true;
                self.start(*body)?.wrap(|inner| Res::Label { node: id, inner })
            }
        })
    }

    pub fn resume(&mut self, res: Res) -> Result<Out, RuntimeError> {
        let ir = self.ir;
        Ok(match res {
            Res::Pause => Out::Done,
            Res::Seq { node, idx, inner } => match self.resume(*inner)? {
                Out::Paused(r) => Out::Paused(Res::Seq {
                    node,
                    idx,
                    inner: Box::new(r),
                }),
                Out::Done => {
                    let KNode::Seq(items) = &ir.nodes[node] else {
                        unreachable!("sequence residue on a non-sequence node")
                    };
                    self.seq_from(node, items, idx + 1)?
                }
            },
            Res::Par { node, left, right } => {
                let left = match left {
                    Some(r) => self.resume(*r)?,
                    None => Out::Done,
                };
                let right = match right {
                    Some(r) => self.resume(*r)?,
                    None => Out::Done,
                };
                Self::par(node, left, right)
            }
            Res::Loop { node, inner } => match self.resume(*inner)? {
                Out::Paused(r) => Out::Paused(Res::Loop {
                    node,
                    inner: Box::new(r),
                }),
                Out::Done => {
                    let KNode::Loop(body) = ir.nodes[node] else {
                        unreachable!("loop residue on a non-loop node")
                    };
                    self.restart_loop(node, body)?
                }
            },
            Res::Abort { node, inner } => {
                let KNode::Abort { guard, .. } = &ir.nodes[node] else {
                    unreachable!("abort residue on a non-abort node")
                };
                if self.truth(guard)? {
                    Out::Done
                } else {
                    self.resume(*inner)?.wrap(|inner| Res::Abort { node, inner })
                }
            }
            Res::Suspend { node, inner } => {
                let KNode::Suspend { guard, body, .. } = &ir.nodes[node] else {
                    unreachable!("suspend residue on a non-suspend node")
                };
                if self.truth(guard)? {
                    let mut inner = inner;
                    if let Some(r) = &mut inner {
                        r.quiesce();
                    }
                    Out::Paused(Res::Suspend { node, inner })
                } else {
                    let out = match inner {
                        Some(r) => self.resume(*r)?,
                        None => self.start(*body)?,
                    };
                    out.wrap(|inner| Res::Suspend {
                        node,
                        inner: Some(inner),
                    })
                }
            }
            Res::Decl { node, inner } => self.resume(*inner)?.wrap(|inner| Res::Decl { node, inner }),
            Res::Flow { node, stop } => {
                if stop {
                    Out::Done
                } else {
                    let KNode::Flow(site) = ir.nodes[node] else {
                        unreachable!("flow residue on a non-flow node")
                    };
                    let stop = self.flow_iteration(site)?;
                    Out::Paused(Res::Flow { node, stop })
                }
            }
            Res::Label { node, inner } => {
                let KNode::Label { label, .. } = ir.nodes[node] else {
                    unreachable!("label residue on a non-label node")
                };
                self.fired[label] = true;
                self.resume(*inner)?.wrap(|inner| Res::Label { node, inner })
            }
        })
    }

    /// Folds every pending buffer into the settled state.
    pub fn settle(mut self) -> Result<Settled, RuntimeError> {
        for (i, p) in std::mem::take(&mut self.pending).into_iter().enumerate() {
            let info = &self.ir.slots[i];
            let slot = &mut self.slots[i];
            if info.is_signal() {
                slot.status = p.status;
            }
            if !p.writes.is_empty() {
                slot.value = fold_writes(info.combine, p.writes).map_err(|e| match e {
                    FoldError::NoCombine => RuntimeError::MultipleWrites {
                        name: info.display.clone(),
                    },
                    FoldError::NotNumeric => RuntimeError::CombineType {
                        name: info.display.clone(),
                    },
                })?;
            }
        }
        Ok((self.slots, self.fired, self.reads))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoldError {
    NoCombine,
    NotNumeric,
}

/// Resolves the writes of one tick: a single write wins, several are
/// left-folded with the combine operator.
pub fn fold_writes(op: Option<CombineOp>, writes: Vec<Value>) -> Result<Value, FoldError> {
    let mut it = writes.into_iter();
    let first = it.next().expect("fold of no writes");
    let Some(second) = it.next() else {
        return Ok(first);
    };
    let op = op.ok_or(FoldError::NoCombine)?;
    let num = |v: Value| match v {
        Value::Num(n) => Ok(n),
        Value::Bool(_) => Err(FoldError::NotNumeric),
    };
    let mut acc = op.apply(&num(first)?, &num(second)?);
    for v in it {
        acc = op.apply(&acc, &num(v)?);
    }
    Ok(Value::Num(acc))
}
