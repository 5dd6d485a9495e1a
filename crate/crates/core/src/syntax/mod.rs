//! Front end: lexer, parser, static checks and pretty-printer for the
//! kernel language with continuous variables.

pub mod ast;
mod check;
pub mod lexer;
mod parser;
mod printer;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;
use crate::value::Value;

pub use ast::*;
pub use check::{reject_nonlinear_combine, CombineError};
pub use printer::{pretty_print, print_expr};

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error("{pos}: lex error: {msg}")]
    Lex { pos: Pos, msg: String },
    #[error("{pos}: parse error: expected {expected}, found {found}")]
    Parse {
        pos: Pos,
        expected: String,
        found: String,
    },
    #[error("{pos}: undefined name `{name}`")]
    Undefined { pos: Pos, name: String },
    #[error("{pos}: type error: {msg}")]
    Type { pos: Pos, msg: String },
    #[error("{pos}: `{name}` is already declared in this scope")]
    Duplicate { pos: Pos, name: String },
    #[error("{pos}: loop body can terminate without pausing")]
    InstantaneousLoop { pos: Pos },
    #[error("{pos}: rate of `{var}` is not a constant")]
    NonConstantRate { pos: Pos, var: String },
    #[error("{pos}: parameter `{name}` has no value (bind it with --param)")]
    UndefinedParam { pos: Pos, name: String },
}

impl SyntaxError {
    pub fn pos(&self) -> Pos {
        match self {
            SyntaxError::Lex { pos, .. }
            | SyntaxError::Parse { pos, .. }
            | SyntaxError::Undefined { pos, .. }
            | SyntaxError::Type { pos, .. }
            | SyntaxError::Duplicate { pos, .. }
            | SyntaxError::InstantaneousLoop { pos }
            | SyntaxError::NonConstantRate { pos, .. }
            | SyntaxError::UndefinedParam { pos, .. } => *pos,
        }
    }
}

/// Parses a program whose parameters all carry defaults in the source.
pub fn parse(source: &str) -> Result<Program, SyntaxError> {
    parse_with_params(source, &BTreeMap::new())
}

/// Parses a program, binding `param` declarations from `params` first and
/// falling back to their in-source defaults.
pub fn parse_with_params(
    source: &str,
    params: &BTreeMap<String, Rational>,
) -> Result<Program, SyntaxError> {
    parser::Parser::new(source, params)?.program()
}

/// Folds an expression built only from literals and parameters.
pub fn fold_const(e: &Expr) -> Option<Value> {
    match e {
        Expr::Num(n) => Some(Value::Num(n.clone())),
        Expr::Bool(b) => Some(Value::Bool(*b)),
        Expr::Param(_, v) => Some(Value::Num(v.clone())),
        Expr::Unary(op, inner) => apply_unop(*op, fold_const(inner)?).ok(),
        Expr::Binary(op, a, b) => apply_binop(*op, fold_const(a)?, fold_const(b)?).ok(),
        Expr::Status(_) | Expr::Value(_) | Expr::Cont(_) | Expr::Ttl(_) => None,
    }
}

/// Operand kinds did not fit the operator; unreachable for checked programs.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("operator `{op}` applied to ill-typed operands")]
pub struct OperandError {
    pub op: &'static str,
}

pub fn apply_unop(op: UnOp, v: Value) -> Result<Value, OperandError> {
    match (op, v) {
        (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
        (UnOp::Neg, Value::Num(n)) => Ok(Value::Num(-n)),
        (UnOp::Not, _) => Err(OperandError { op: "!" }),
        (UnOp::Neg, _) => Err(OperandError { op: "-" }),
    }
}

pub fn apply_binop(op: BinOp, a: Value, b: Value) -> Result<Value, OperandError> {
    let err = || OperandError { op: op.symbol() };
    Ok(match op {
        BinOp::Or | BinOp::And => {
            let (x, y) = (a.as_bool().ok_or_else(err)?, b.as_bool().ok_or_else(err)?);
            Value::Bool(if op == BinOp::Or { x || y } else { x && y })
        }
        BinOp::Eq | BinOp::Ne => {
            let same = match (&a, &b) {
                (Value::Bool(x), Value::Bool(y)) => x == y,
                (Value::Num(x), Value::Num(y)) => x == y,
                _ => return Err(err()),
            };
            Value::Bool(same == (op == BinOp::Eq))
        }
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let (x, y) = (a.as_num().ok_or_else(err)?, b.as_num().ok_or_else(err)?);
            Value::Bool(match op {
                BinOp::Lt => x < y,
                BinOp::Le => x <= y,
                BinOp::Gt => x > y,
                _ => x >= y,
            })
        }
        BinOp::Add | BinOp::Sub | BinOp::Mul => {
            let (x, y) = (a.as_num().ok_or_else(err)?, b.as_num().ok_or_else(err)?);
            Value::Num(match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                _ => x * y,
            })
        }
    })
}
