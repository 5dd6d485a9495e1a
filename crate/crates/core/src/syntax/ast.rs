//! Abstract syntax of the kernel language extended with continuous variables.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::rational::Rational;
use crate::value::Value;

pub type Name = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "||",
            BinOp::And => "&&",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
        }
    }

    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul => 5,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 3
    }
}

/// Expressions. Names are resolved by the parser, so every reference
/// already says which kind of entity it reads.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    /// Numeric literal; integral values type as `integer`, others as `ratio`.
    Num(Rational),
    Bool(bool),
    /// Status of a signal (bare name).
    Status(Name),
    /// Value of a valued signal (`?name`).
    Value(Name),
    /// Continuous variable (bare name).
    Cont(Name),
    /// Named compile-time constant with its bound value.
    Param(Name, Rational),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// Two-tick look-ahead intrinsic inserted by the flow rewrite.
    Ttl(TtlCall),
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn negated(e: Expr) -> Expr {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    /// Continuous variables read anywhere in this expression.
    pub fn cont_reads(&self, out: &mut BTreeSet<Name>) {
        match self {
            Expr::Cont(n) => {
                out.insert(n.clone());
            }
            Expr::Unary(_, e) => e.cont_reads(out),
            Expr::Binary(_, a, b) => {
                a.cont_reads(out);
                b.cont_reads(out);
            }
            Expr::Ttl(call) => {
                call.invariant.cont_reads(out);
                out.extend(call.vars.iter().cloned());
            }
            _ => {}
        }
    }

    pub fn is_true_literal(&self) -> bool {
        matches!(self, Expr::Bool(true))
    }
}

/// One first-order constant-rate ODE `var' = rate`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ode {
    pub var: Name,
    pub rate: Rational,
}

/// The ODEs of one `do` block, in source order. Never empty.
pub type OdeList = Vec<Ode>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TtlCall {
    pub odes: OdeList,
    pub invariant: Box<Expr>,
    pub vars: Vec<Name>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CombineOp {
    Plus,
    Times,
}

impl CombineOp {
    pub fn apply(self, a: &Rational, b: &Rational) -> Rational {
        match self {
            CombineOp::Plus => a + b,
            CombineOp::Times => a * b,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            CombineOp::Plus => "op+",
            CombineOp::Times => "op*",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Input,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValueType {
    Ratio,
    Integer,
    Boolean,
}

impl ValueType {
    pub fn keyword(self) -> &'static str {
        match self {
            ValueType::Ratio => "ratio",
            ValueType::Integer => "integer",
            ValueType::Boolean => "boolean",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignalDecl {
    pub direction: Option<Direction>,
    /// `None` with no combine op and no initialiser means a pure signal.
    pub ty: Option<ValueType>,
    pub name: Name,
    pub combine: Option<CombineOp>,
    pub init: Option<Expr>,
    pub body: Box<Stmt>,
}

impl SignalDecl {
    pub fn is_valued(&self) -> bool {
        self.ty.is_some() || self.combine.is_some() || self.init.is_some()
    }

    /// Declared type, with untyped valued signals defaulting to `ratio`.
    pub fn value_type(&self) -> Option<ValueType> {
        if self.is_valued() {
            Some(self.ty.unwrap_or(ValueType::Ratio))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContDecl {
    pub name: Name,
    pub combine: Option<CombineOp>,
    pub init: Option<Expr>,
    pub body: Box<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stmt {
    Nothing,
    Emit(Name),
    /// `?name = expr`
    ValueWrite(Name, Expr),
    Pause,
    Abort {
        immediate: bool,
        guard: Expr,
        body: Box<Stmt>,
    },
    Suspend {
        immediate: bool,
        guard: Expr,
        body: Box<Stmt>,
    },
    If {
        cond: Expr,
        then: Box<Stmt>,
        els: Box<Stmt>,
    },
    Signal(SignalDecl),
    Cont(ContDecl),
    /// `name = expr` on a continuous variable.
    Assign(Name, Expr),
    Loop(Box<Stmt>),
    Seq(Box<Stmt>, Box<Stmt>),
    Par(Box<Stmt>, Box<Stmt>),
    DoUntil {
        odes: OdeList,
        invariant: Expr,
    },
    Label(Name, Box<Stmt>),
}

impl Stmt {
    /// Sequential composition kept right-nested, the shape the parser builds.
    pub fn seq(first: Stmt, second: Stmt) -> Stmt {
        match first {
            Stmt::Seq(a, b) => Stmt::Seq(a, Box::new(Stmt::seq(*b, second))),
            other => Stmt::Seq(Box::new(other), Box::new(second)),
        }
    }

    pub fn seq_all(items: impl IntoIterator<Item = Stmt>) -> Stmt {
        let mut items: Vec<Stmt> = items.into_iter().collect();
        let Some(mut acc) = items.pop() else {
            return Stmt::Nothing;
        };
        while let Some(prev) = items.pop() {
            acc = Stmt::seq(prev, acc);
        }
        acc
    }

    pub fn contains_do_until(&self) -> bool {
        let mut found = false;
        self.visit(&mut |s| found |= matches!(s, Stmt::DoUntil { .. }));
        found
    }

    /// Pre-order traversal of every statement node.
    pub fn visit(&self, f: &mut impl FnMut(&Stmt)) {
        f(self);
        match self {
            Stmt::Abort { body, .. }
            | Stmt::Suspend { body, .. }
            | Stmt::Loop(body)
            | Stmt::Label(_, body) => body.visit(f),
            Stmt::Signal(d) => d.body.visit(f),
            Stmt::Cont(d) => d.body.visit(f),
            Stmt::If { then, els, .. } => {
                then.visit(f);
                els.visit(f);
            }
            Stmt::Seq(a, b) | Stmt::Par(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    /// True when every execution path from the start of this statement
    /// reaches a `pause` before terminating.
    pub fn must_pause(&self) -> bool {
        match self {
            Stmt::Nothing | Stmt::Emit(_) | Stmt::ValueWrite(..) | Stmt::Assign(..) => false,
            Stmt::Pause | Stmt::Loop(_) | Stmt::DoUntil { .. } => true,
            Stmt::Abort {
                immediate, body, ..
            } => !immediate && body.must_pause(),
            Stmt::Suspend { body, .. } => body.must_pause(),
            Stmt::If { then, els, .. } => then.must_pause() && els.must_pause(),
            Stmt::Signal(d) => d.body.must_pause(),
            Stmt::Cont(d) => d.body.must_pause(),
            Stmt::Seq(a, b) | Stmt::Par(a, b) => a.must_pause() || b.must_pause(),
            Stmt::Label(_, body) => body.must_pause(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamDecl {
    pub name: Name,
    pub value: Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SymbolKind {
    PureSignal,
    ValuedSignal(ValueType),
    Cont,
}

/// One declaration site, recorded in source order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Symbol {
    pub name: Name,
    pub kind: SymbolKind,
    pub direction: Option<Direction>,
    pub combine: Option<CombineOp>,
    pub init: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Program {
    pub params: Vec<ParamDecl>,
    pub root: Stmt,
}

impl Program {
    /// Every declaration in the program, in source order.
    pub fn symbols(&self) -> Vec<Symbol> {
        let mut out = Vec::new();
        self.root.visit(&mut |s| match s {
            Stmt::Signal(d) => out.push(Symbol {
                name: d.name.clone(),
                kind: match d.value_type() {
                    Some(t) => SymbolKind::ValuedSignal(t),
                    None => SymbolKind::PureSignal,
                },
                direction: d.direction,
                combine: d.combine,
                init: d.init.as_ref().and_then(crate::syntax::fold_const),
            }),
            Stmt::Cont(d) => out.push(Symbol {
                name: d.name.clone(),
                kind: SymbolKind::Cont,
                direction: None,
                combine: d.combine,
                init: d.init.as_ref().and_then(crate::syntax::fold_const),
            }),
            _ => {}
        });
        out
    }

    pub fn inputs(&self) -> Vec<Name> {
        self.symbols()
            .into_iter()
            .filter(|s| s.direction == Some(Direction::Input))
            .map(|s| s.name)
            .collect()
    }

    pub fn outputs(&self) -> Vec<Name> {
        self.symbols()
            .into_iter()
            .filter(|s| s.direction == Some(Direction::Output))
            .map(|s| s.name)
            .collect()
    }

    pub fn param(&self, name: &str) -> Option<&Rational> {
        self.params.iter().find(|p| p.name == name).map(|p| &p.value)
    }
}
