//! Lowering of a checked AST into the arena IR the reaction engine runs.
//!
//! Names are resolved to storage slots here, one slot per declaration
//! site, so the engine never looks anything up by name.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::CompileError;
use crate::rational::Rational;
use crate::syntax::{
    fold_const, BinOp, CombineOp, Direction, Expr, Name, Ode, Program, Stmt, SymbolKind, UnOp,
    ValueType,
};
use crate::value::Value;

pub type NodeId = usize;

/// Storage slot of one declaration site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SlotId(pub u32);

impl SlotId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Static description of a slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotInfo {
    /// Source name.
    pub name: Name,
    /// Unique name used in traces: `name`, then `name@2`, `name@3`, … for
    /// later declarations reusing it.
    pub display: Name,
    pub kind: SymbolKind,
    pub direction: Option<Direction>,
    pub combine: Option<CombineOp>,
    pub init: Value,
}

impl SlotInfo {
    pub fn is_signal(&self) -> bool {
        !matches!(self.kind, SymbolKind::Cont)
    }

    pub fn is_valued(&self) -> bool {
        matches!(self.kind, SymbolKind::ValuedSignal(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KExpr {
    Const(Value),
    Status(SlotId),
    Value(SlotId),
    Cont(SlotId),
    Unary(UnOp, Box<KExpr>),
    Binary(BinOp, Box<KExpr>, Box<KExpr>),
    /// Index into [`Ir::ttl_sites`].
    Ttl(usize),
}

/// Resolved arguments of a look-ahead call, or of a natively run flow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TtlSite {
    pub odes: Vec<(SlotId, Rational)>,
    pub invariant: KExpr,
    pub vars: Vec<SlotId>,
    /// `until (true)`: the flow never stops on its own.
    pub forever: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KNode {
    Nothing,
    Emit(SlotId),
    Write(SlotId, KExpr),
    Assign(SlotId, KExpr),
    Pause,
    Abort {
        immediate: bool,
        guard: KExpr,
        body: NodeId,
    },
    Suspend {
        immediate: bool,
        guard: KExpr,
        body: NodeId,
    },
    If {
        cond: KExpr,
        then: NodeId,
        els: NodeId,
    },
    Decl {
        slot: SlotId,
        body: NodeId,
    },
    Loop(NodeId),
    /// Flattened sequence, never fewer than two items.
    Seq(Vec<NodeId>),
    Par(NodeId, NodeId),
    /// Flow action run natively; index into [`Ir::ttl_sites`].
    Flow(usize),
    Label {
        label: usize,
        body: NodeId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ir {
    pub nodes: Vec<KNode>,
    pub root: NodeId,
    pub slots: Vec<SlotInfo>,
    pub labels: Vec<Name>,
    pub ttl_sites: Vec<TtlSite>,
}

impl Ir {
    pub fn slot(&self, id: SlotId) -> &SlotInfo {
        &self.slots[id.index()]
    }

    pub fn slot_by_display(&self, display: &str) -> Option<SlotId> {
        self.slots
            .iter()
            .position(|s| s.display == display)
            .map(|i| SlotId(i as u32))
    }
}

/// Lowers `program`. Flow actions are kept as native nodes when
/// `native_flows` is set and rejected otherwise.
pub fn lower(program: &Program, native_flows: bool) -> Result<Ir, CompileError> {
    let mut lw = Lowerer {
        native_flows,
        nodes: Vec::new(),
        slots: Vec::new(),
        labels: Vec::new(),
        ttl_sites: Vec::new(),
        scope: Vec::new(),
        seen: BTreeMap::new(),
    };
    let root = lw.stmt(&program.root)?;
    Ok(Ir {
        nodes: lw.nodes,
        root,
        slots: lw.slots,
        labels: lw.labels,
        ttl_sites: lw.ttl_sites,
    })
}

struct Lowerer {
    native_flows: bool,
    nodes: Vec<KNode>,
    slots: Vec<SlotInfo>,
    labels: Vec<Name>,
    ttl_sites: Vec<TtlSite>,
    scope: Vec<(Name, SlotId)>,
    seen: BTreeMap<Name, usize>,
}

impl Lowerer {
    fn push(&mut self, n: KNode) -> NodeId {
        self.nodes.push(n);
        self.nodes.len() - 1
    }

    fn resolve(&self, name: &str) -> Result<SlotId, CompileError> {
        self.scope
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, s)| *s)
            .ok_or_else(|| CompileError::Unresolved { name: name.into() })
    }

    fn declare(
        &mut self,
        name: &Name,
        kind: SymbolKind,
        direction: Option<Direction>,
        combine: Option<CombineOp>,
        init: Option<&Expr>,
    ) -> Result<SlotId, CompileError> {
        let init = match init {
            Some(e) => fold_const(e).ok_or_else(|| CompileError::NonConstantInit { name: name.clone() })?,
            None => match kind {
                SymbolKind::ValuedSignal(ValueType::Boolean) => Value::Bool(false),
                SymbolKind::PureSignal => Value::Bool(false),
                _ => Value::Num(Rational::zero()),
            },
        };
        let count = self.seen.entry(name.clone()).or_insert(0);
        *count += 1;
        let display = if *count == 1 {
            name.clone()
        } else {
            format!("{name}@{count}")
        };
        self.slots.push(SlotInfo {
            name: name.clone(),
            display,
            kind,
            direction,
            combine,
            init,
        });
        Ok(SlotId(self.slots.len() as u32 - 1))
    }

    fn scoped(&mut self, name: &Name, slot: SlotId, body: &Stmt) -> Result<NodeId, CompileError> {
        self.scope.push((name.clone(), slot));
        let body = self.stmt(body);
        self.scope.pop();
        let body = body?;
        Ok(self.push(KNode::Decl { slot, body }))
    }

    fn site(&mut self, odes: &[Ode], invariant: &Expr, vars: &[Name]) -> Result<usize, CompileError> {
        let odes = odes
            .iter()
            .map(|o| Ok((self.resolve(&o.var)?, o.rate.clone())))
            .collect::<Result<Vec<_>, CompileError>>()?;
        let vars = vars
            .iter()
            .map(|v| self.resolve(v))
            .collect::<Result<Vec<_>, _>>()?;
        let site = TtlSite {
            odes,
            forever: invariant.is_true_literal(),
            invariant: self.expr(invariant)?,
            vars,
        };
        self.ttl_sites.push(site);
        Ok(self.ttl_sites.len() - 1)
    }

    fn expr(&mut self, e: &Expr) -> Result<KExpr, CompileError> {
        Ok(match e {
            Expr::Num(n) | Expr::Param(_, n) => KExpr::Const(Value::Num(n.clone())),
            Expr::Bool(b) => KExpr::Const(Value::Bool(*b)),
            Expr::Status(n) => KExpr::Status(self.resolve(n)?),
            Expr::Value(n) => KExpr::Value(self.resolve(n)?),
            Expr::Cont(n) => KExpr::Cont(self.resolve(n)?),
            Expr::Unary(op, a) => KExpr::Unary(*op, Box::new(self.expr(a)?)),
            Expr::Binary(op, a, b) => {
                KExpr::Binary(*op, Box::new(self.expr(a)?), Box::new(self.expr(b)?))
            }
            Expr::Ttl(call) => KExpr::Ttl(self.site(&call.odes, &call.invariant, &call.vars)?),
        })
    }

    fn stmt(&mut self, s: &Stmt) -> Result<NodeId, CompileError> {
        let node = match s {
            Stmt::Nothing => KNode::Nothing,
            Stmt::Pause => KNode::Pause,
            Stmt::Emit(n) => KNode::Emit(self.resolve(n)?),
            Stmt::ValueWrite(n, e) => KNode::Write(self.resolve(n)?, self.expr(e)?),
            Stmt::Assign(n, e) => KNode::Assign(self.resolve(n)?, self.expr(e)?),
            Stmt::Abort {
                immediate,
                guard,
                body,
            } => KNode::Abort {
                immediate: *immediate,
                guard: self.expr(guard)?,
                body: self.stmt(body)?,
            },
            Stmt::Suspend {
                immediate,
                guard,
                body,
            } => KNode::Suspend {
                immediate: *immediate,
                guard: self.expr(guard)?,
                body: self.stmt(body)?,
            },
            Stmt::If { cond, then, els } => KNode::If {
                cond: self.expr(cond)?,
                then: self.stmt(then)?,
                els: self.stmt(els)?,
            },
            Stmt::Signal(d) => {
                let kind = match d.value_type() {
                    Some(t) => SymbolKind::ValuedSignal(t),
                    None => SymbolKind::PureSignal,
                };
                let slot = self.declare(&d.name, kind, d.direction, d.combine, d.init.as_ref())?;
                return self.scoped(&d.name, slot, &d.body);
            }
            Stmt::Cont(d) => {
                let slot = self.declare(&d.name, SymbolKind::Cont, None, d.combine, d.init.as_ref())?;
                return self.scoped(&d.name, slot, &d.body);
            }
            Stmt::Loop(body) => KNode::Loop(self.stmt(body)?),
            Stmt::Seq(..) => {
                let mut items = Vec::new();
                let mut cur = s;
                while let Stmt::Seq(a, b) = cur {
                    items.push(self.stmt(a)?);
                    cur = b;
                }
                items.push(self.stmt(cur)?);
                KNode::Seq(items)
            }
            Stmt::Par(a, b) => KNode::Par(self.stmt(a)?, self.stmt(b)?),
            Stmt::DoUntil { odes, invariant } => {
                if !self.native_flows {
                    return Err(CompileError::FlowNotRewritten);
                }
                let vars = crate::rewrite::flow_vars(odes);
                KNode::Flow(self.site(odes, invariant, &vars)?)
            }
            Stmt::Label(name, body) => {
                let label = match self.labels.iter().position(|l| l == name) {
                    Some(i) => i,
                    None => {
                        self.labels.push(name.clone());
                        self.labels.len() - 1
                    }
                };
                KNode::Label {
                    label,
                    body: self.stmt(body)?,
                }
            }
        };
        Ok(self.push(node))
    }
}
