//! Recursive-descent parser with inline name resolution and type checking.
//!
//! Statement grammar, loosest binding first:
//!
//! ```text
//! stmt  ::= decl ";" stmt | stmt0 ["||" stmt]
//! stmt0 ::= stmt1 [";" stmt0]      (";" optional after "}")
//! stmt1 ::= nothing | pause | emit a | ?a = expr | a = expr | l: stmt1
//!         | abort ([immediate] expr) stmt1 | suspend ([immediate] expr) stmt1
//!         | if (expr) [stmt1] [else stmt1] | loop stmt1 | { stmt }
//!         | do { a' = expr || ... } until (expr)
//! ```
//!
//! A declaration scopes over the remainder of its enclosing block, including
//! any parallel composition that follows it.

use std::collections::{BTreeMap, HashSet};

use crate::rational::Rational;

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::{fold_const, Pos, SyntaxError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Bool,
    Int,
    Ratio,
}

impl Ty {
    fn is_num(self) -> bool {
        matches!(self, Ty::Int | Ty::Ratio)
    }

    fn of_value_type(t: ValueType) -> Ty {
        match t {
            ValueType::Boolean => Ty::Bool,
            ValueType::Integer => Ty::Int,
            ValueType::Ratio => Ty::Ratio,
        }
    }

    fn of_number(n: &Rational) -> Ty {
        if n.is_integer() {
            Ty::Int
        } else {
            Ty::Ratio
        }
    }

    fn name(self) -> &'static str {
        match self {
            Ty::Bool => "boolean",
            Ty::Int => "integer",
            Ty::Ratio => "ratio",
        }
    }
}

#[derive(Debug, Clone)]
enum Entity {
    Signal(Option<ValueType>),
    Cont,
    Param(Rational),
}

pub(super) struct Parser<'p> {
    toks: Vec<Token>,
    at: usize,
    scope: Vec<(Name, Entity)>,
    blocks: Vec<HashSet<Name>>,
    bindings: &'p BTreeMap<String, Rational>,
}

type PResult<T> = Result<T, SyntaxError>;

impl<'p> Parser<'p> {
    pub(super) fn new(source: &str, bindings: &'p BTreeMap<String, Rational>) -> PResult<Self> {
        Ok(Parser {
            toks: lex(source)?,
            at: 0,
            scope: Vec::new(),
            blocks: vec![HashSet::new()],
            bindings,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.at + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &str) -> SyntaxError {
        SyntaxError::Parse {
            pos: self.pos(),
            expected: expected.to_string(),
            found: self.peek().to_string(),
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<Pos> {
        if *self.peek() == tok {
            Ok(self.bump().pos)
        } else {
            Err(self.unexpected(&tok.to_string()))
        }
    }

    fn ident(&mut self) -> PResult<(Name, Pos)> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let pos = self.bump().pos;
                Ok((name, pos))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn lookup(&self, name: &str) -> Option<&Entity> {
        self.scope
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, e)| e)
    }

    fn declare(&mut self, name: &str, entity: Entity, pos: Pos) -> PResult<()> {
        let block = self.blocks.last_mut().expect("block stack never empty");
        if !block.insert(name.to_string()) {
            return Err(SyntaxError::Duplicate {
                pos,
                name: name.to_string(),
            });
        }
        self.scope.push((name.to_string(), entity));
        Ok(())
    }

    fn at_stmt_end(&self) -> bool {
        matches!(self.peek(), Tok::RBrace | Tok::Eof)
    }

    fn at_stmt_start(&self) -> bool {
        self.at_decl()
            || matches!(
                self.peek(),
                Tok::Nothing
                    | Tok::Emit
                    | Tok::Pause
                    | Tok::Abort
                    | Tok::Suspend
                    | Tok::If
                    | Tok::Loop
                    | Tok::Do
                    | Tok::LBrace
                    | Tok::Question
                    | Tok::Ident(_)
            )
    }

    fn at_decl(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Signal | Tok::Cont | Tok::Input | Tok::Output | Tok::TyRatio | Tok::TyInteger | Tok::TyBoolean
        )
    }

    pub(super) fn program(&mut self) -> PResult<Program> {
        let mut params = Vec::new();
        while *self.peek() == Tok::Param {
            self.bump();
            loop {
                let (name, pos) = self.ident()?;
                let default = if self.eat(&Tok::Assign) {
                    let epos = self.pos();
                    let (e, ty) = self.expr(false)?;
                    if !ty.is_num() {
                        return Err(type_error(epos, "parameter values must be numeric"));
                    }
                    match fold_const(&e) {
                        Some(crate::value::Value::Num(n)) => Some(n),
                        _ => return Err(type_error(epos, "parameter default must be constant")),
                    }
                } else {
                    None
                };
                let value = match self.bindings.get(&name).cloned().or(default) {
                    Some(v) => v,
                    None => return Err(SyntaxError::UndefinedParam { pos, name }),
                };
                self.declare(&name, Entity::Param(value.clone()), pos)?;
                params.push(ParamDecl { name, value });
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::Semi)?;
        }
        let root = if *self.peek() == Tok::Eof {
            Stmt::Nothing
        } else {
            self.stmt()?
        };
        if *self.peek() != Tok::Eof {
            return Err(self.unexpected("end of input"));
        }
        Ok(Program { params, root })
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        if self.at_decl() {
            return self.decl_stmt();
        }
        let left = self.stmt0()?;
        if self.eat(&Tok::OrOr) {
            let right = self.stmt()?;
            Ok(Stmt::Par(Box::new(left), Box::new(right)))
        } else {
            Ok(left)
        }
    }

    fn stmt0(&mut self) -> PResult<Stmt> {
        let first = self.stmt1()?;
        // A closing brace may stand in for the separator.
        let after_block = self.at > 0 && self.toks[self.at - 1].tok == Tok::RBrace;
        if !self.eat(&Tok::Semi) && !(after_block && self.at_stmt_start()) {
            return Ok(first);
        }
        if self.at_stmt_end() || *self.peek() == Tok::OrOr {
            return Ok(first);
        }
        let rest = if self.at_decl() {
            self.decl_stmt()?
        } else {
            self.stmt0()?
        };
        Ok(Stmt::seq(first, rest))
    }

    fn decl_stmt(&mut self) -> PResult<Stmt> {
        let scope_mark = self.scope.len();
        let decls = self.declarators()?;
        let body = if self.eat(&Tok::Semi) {
            if self.at_stmt_end() {
                Stmt::Nothing
            } else {
                self.stmt()?
            }
        } else if self.at_stmt_end() {
            Stmt::Nothing
        } else {
            return Err(self.unexpected("`;`"));
        };
        self.scope.truncate(scope_mark);
        let mut acc = body;
        for d in decls.into_iter().rev() {
            acc = match d {
                Declarator::Signal(mut sd) => {
                    sd.body = Box::new(acc);
                    Stmt::Signal(sd)
                }
                Declarator::Cont(mut cd) => {
                    cd.body = Box::new(acc);
                    Stmt::Cont(cd)
                }
            };
        }
        Ok(acc)
    }

    fn declarators(&mut self) -> PResult<Vec<Declarator>> {
        let mut out = Vec::new();
        if self.eat(&Tok::Cont) {
            loop {
                let (name, pos) = self.ident()?;
                let combine = self.combine_op();
                let init = self.initialiser(Ty::Ratio)?;
                self.declare(&name, Entity::Cont, pos)?;
                out.push(Declarator::Cont(ContDecl {
                    name,
                    combine,
                    init,
                    body: Box::new(Stmt::Nothing),
                }));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            return Ok(out);
        }
        let direction = match self.peek() {
            Tok::Input => {
                self.bump();
                Some(Direction::Input)
            }
            Tok::Output => {
                self.bump();
                Some(Direction::Output)
            }
            _ => None,
        };
        let ty = match self.peek() {
            Tok::TyRatio => Some(ValueType::Ratio),
            Tok::TyInteger => Some(ValueType::Integer),
            Tok::TyBoolean => Some(ValueType::Boolean),
            _ => None,
        };
        if ty.is_some() {
            self.bump();
        }
        self.expect(Tok::Signal)?;
        loop {
            let (name, pos) = self.ident()?;
            let combine = self.combine_op();
            let expected = Ty::of_value_type(ty.unwrap_or(ValueType::Ratio));
            if combine.is_some() && expected == Ty::Bool {
                return Err(type_error(pos, "combine operators need a numeric signal"));
            }
            let init = self.initialiser(expected)?;
            let mut decl = SignalDecl {
                direction,
                ty,
                name: name.clone(),
                combine,
                init,
                body: Box::new(Stmt::Nothing),
            };
            if !decl.is_valued() {
                decl.ty = None;
            }
            self.declare(&name, Entity::Signal(decl.value_type()), pos)?;
            out.push(Declarator::Signal(decl));
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        Ok(out)
    }

    fn combine_op(&mut self) -> Option<CombineOp> {
        match self.peek() {
            Tok::OpPlus => {
                self.bump();
                Some(CombineOp::Plus)
            }
            Tok::OpTimes => {
                self.bump();
                Some(CombineOp::Times)
            }
            _ => None,
        }
    }

    fn initialiser(&mut self, expected: Ty) -> PResult<Option<Expr>> {
        if !self.eat(&Tok::Assign) {
            return Ok(None);
        }
        let pos = self.pos();
        let (e, ty) = self.expr(false)?;
        check_assignable(expected, ty, pos)?;
        if fold_const(&e).is_none() {
            return Err(type_error(pos, "initialiser must be a constant expression"));
        }
        Ok(Some(e))
    }

    fn stmt1(&mut self) -> PResult<Stmt> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Nothing => {
                self.bump();
                Ok(Stmt::Nothing)
            }
            Tok::Pause => {
                self.bump();
                Ok(Stmt::Pause)
            }
            Tok::Emit => {
                self.bump();
                let (name, npos) = self.ident()?;
                match self.lookup(&name) {
                    Some(Entity::Signal(_)) => Ok(Stmt::Emit(name)),
                    Some(_) => Err(type_error(npos, &format!("`{name}` is not a signal"))),
                    None => Err(SyntaxError::Undefined { pos: npos, name }),
                }
            }
            Tok::Question => {
                self.bump();
                let (name, npos) = self.ident()?;
                let ty = match self.lookup(&name) {
                    Some(Entity::Signal(Some(t))) => *t,
                    Some(_) => {
                        return Err(type_error(npos, &format!("`{name}` is not a valued signal")))
                    }
                    None => return Err(SyntaxError::Undefined { pos: npos, name }),
                };
                self.expect(Tok::Assign)?;
                let epos = self.pos();
                let (e, ety) = self.expr(false)?;
                check_assignable(Ty::of_value_type(ty), ety, epos)?;
                Ok(Stmt::ValueWrite(name, e))
            }
            Tok::Abort | Tok::Suspend => {
                let is_abort = *self.peek() == Tok::Abort;
                self.bump();
                self.expect(Tok::LParen)?;
                let immediate = self.eat(&Tok::Immediate);
                let guard = self.condition()?;
                self.expect(Tok::RParen)?;
                let body = Box::new(self.stmt1()?);
                Ok(if is_abort {
                    Stmt::Abort {
                        immediate,
                        guard,
                        body,
                    }
                } else {
                    Stmt::Suspend {
                        immediate,
                        guard,
                        body,
                    }
                })
            }
            Tok::If => {
                self.bump();
                self.expect(Tok::LParen)?;
                let cond = self.condition()?;
                self.expect(Tok::RParen)?;
                let then = if *self.peek() == Tok::Else {
                    Stmt::Nothing
                } else {
                    self.stmt1()?
                };
                // the listings sometimes write `{ ... }; else { ... }`
                if *self.peek() == Tok::Semi && *self.peek_at(1) == Tok::Else {
                    self.bump();
                }
                let els = if self.eat(&Tok::Else) {
                    self.stmt1()?
                } else {
                    Stmt::Nothing
                };
                Ok(Stmt::If {
                    cond,
                    then: Box::new(then),
                    els: Box::new(els),
                })
            }
            Tok::Loop => {
                self.bump();
                let body = self.stmt1()?;
                if !body.must_pause() {
                    return Err(SyntaxError::InstantaneousLoop { pos });
                }
                Ok(Stmt::Loop(Box::new(body)))
            }
            Tok::LBrace => {
                self.bump();
                self.blocks.push(HashSet::new());
                let scope_mark = self.scope.len();
                let inner = if *self.peek() == Tok::RBrace {
                    Stmt::Nothing
                } else {
                    self.stmt()?
                };
                self.expect(Tok::RBrace)?;
                self.scope.truncate(scope_mark);
                self.blocks.pop();
                Ok(inner)
            }
            Tok::Do => self.do_until(),
            Tok::Ident(name) => {
                if *self.peek_at(1) == Tok::Colon {
                    self.bump();
                    self.bump();
                    let body = self.stmt1()?;
                    return Ok(Stmt::Label(name, Box::new(body)));
                }
                self.bump();
                match self.lookup(&name) {
                    Some(Entity::Cont) => {}
                    Some(_) => {
                        return Err(type_error(
                            pos,
                            &format!("`{name}` is not a continuous variable"),
                        ))
                    }
                    None => return Err(SyntaxError::Undefined { pos, name }),
                }
                self.expect(Tok::Assign)?;
                let epos = self.pos();
                let (e, ty) = self.expr(false)?;
                check_assignable(Ty::Ratio, ty, epos)?;
                Ok(Stmt::Assign(name, e))
            }
            _ => Err(self.unexpected("statement")),
        }
    }

    fn do_until(&mut self) -> PResult<Stmt> {
        self.expect(Tok::Do)?;
        self.expect(Tok::LBrace)?;
        let mut odes = Vec::new();
        loop {
            odes.push(self.ode(false)?);
            if !self.eat(&Tok::OrOr) {
                break;
            }
        }
        self.expect(Tok::RBrace)?;
        self.expect(Tok::Until)?;
        self.expect(Tok::LParen)?;
        let invariant = self.condition()?;
        self.expect(Tok::RParen)?;
        Ok(Stmt::DoUntil { odes, invariant })
    }

    fn ode(&mut self, allow_or: bool) -> PResult<Ode> {
        let (var, pos) = self.ident()?;
        match self.lookup(&var) {
            Some(Entity::Cont) => {}
            Some(_) => {
                return Err(type_error(
                    pos,
                    &format!("`{var}` is not a continuous variable"),
                ))
            }
            None => return Err(SyntaxError::Undefined { pos, name: var }),
        }
        self.expect(Tok::Prime)?;
        self.expect(Tok::Assign)?;
        let epos = self.pos();
        let (rate, ty) = self.expr(allow_or)?;
        if !ty.is_num() {
            return Err(type_error(epos, "rate must be numeric"));
        }
        match fold_const(&rate) {
            Some(crate::value::Value::Num(rate)) => Ok(Ode { var, rate }),
            _ => Err(SyntaxError::NonConstantRate { pos: epos, var }),
        }
    }

    fn condition(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let (e, ty) = self.expr(true)?;
        if ty != Ty::Bool {
            return Err(type_error(pos, "condition must be boolean"));
        }
        Ok(e)
    }

    /// `allow_or` is false at statement level, where `||` is parallel
    /// composition; parentheses re-enable it.
    fn expr(&mut self, allow_or: bool) -> PResult<(Expr, Ty)> {
        self.binary(1, allow_or)
    }

    fn binary(&mut self, min_prec: u8, allow_or: bool) -> PResult<(Expr, Ty)> {
        let (mut lhs, mut lty) = self.unary()?;
        loop {
            let pos = self.pos();
            let op = match self.peek() {
                Tok::OrOr if allow_or => BinOp::Or,
                Tok::AndAnd => BinOp::And,
                Tok::EqEq => BinOp::Eq,
                Tok::NotEq => BinOp::Ne,
                Tok::Lt => BinOp::Lt,
                Tok::Le => BinOp::Le,
                Tok::Gt => BinOp::Gt,
                Tok::Ge => BinOp::Ge,
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                Tok::Star => BinOp::Mul,
                _ => break,
            };
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let (rhs, rty) = self.binary(prec + 1, allow_or)?;
            let ty = binary_type(op, lty, rty).ok_or_else(|| {
                type_error(
                    pos,
                    &format!(
                        "operator `{}` cannot combine {} and {}",
                        op.symbol(),
                        lty.name(),
                        rty.name()
                    ),
                )
            })?;
            lhs = Expr::binary(op, lhs, rhs);
            lty = ty;
            if op.is_comparison() && self.peek_comparison() {
                return Err(self.unexpected("end of comparison"));
            }
        }
        Ok((lhs, lty))
    }

    fn peek_comparison(&self) -> bool {
        matches!(
            self.peek(),
            Tok::EqEq | Tok::NotEq | Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge
        )
    }

    fn unary(&mut self) -> PResult<(Expr, Ty)> {
        let pos = self.pos();
        match self.peek() {
            Tok::Bang => {
                self.bump();
                let (e, ty) = self.unary()?;
                if ty != Ty::Bool {
                    return Err(type_error(pos, "`!` needs a boolean operand"));
                }
                Ok((Expr::negated(e), Ty::Bool))
            }
            Tok::Minus => {
                self.bump();
                let (e, ty) = self.unary()?;
                if !ty.is_num() {
                    return Err(type_error(pos, "`-` needs a numeric operand"));
                }
                Ok(match e {
                    Expr::Num(n) => (Expr::Num(-n), ty),
                    other => (Expr::Unary(UnOp::Neg, Box::new(other)), ty),
                })
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> PResult<(Expr, Ty)> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Number(n) => {
                self.bump();
                let ty = Ty::of_number(&n);
                Ok((Expr::Num(n), ty))
            }
            Tok::True => {
                self.bump();
                Ok((Expr::Bool(true), Ty::Bool))
            }
            Tok::False => {
                self.bump();
                Ok((Expr::Bool(false), Ty::Bool))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr(true)?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Question => {
                self.bump();
                let (name, npos) = self.ident()?;
                match self.lookup(&name) {
                    Some(Entity::Signal(Some(t))) => {
                        let ty = Ty::of_value_type(*t);
                        Ok((Expr::Value(name), ty))
                    }
                    Some(_) => Err(type_error(npos, &format!("`{name}` is not a valued signal"))),
                    None => Err(SyntaxError::Undefined { pos: npos, name }),
                }
            }
            Tok::Ident(name) => {
                self.bump();
                match self.lookup(&name) {
                    Some(Entity::Signal(_)) => Ok((Expr::Status(name), Ty::Bool)),
                    Some(Entity::Cont) => Ok((Expr::Cont(name), Ty::Ratio)),
                    Some(Entity::Param(v)) => {
                        let ty = Ty::of_number(v);
                        let v = v.clone();
                        Ok((Expr::Param(name, v), ty))
                    }
                    None => Err(SyntaxError::Undefined { pos, name }),
                }
            }
            Tok::Ttl => self.ttl_call(),
            _ => Err(self.unexpected("expression")),
        }
    }

    fn ttl_call(&mut self) -> PResult<(Expr, Ty)> {
        self.expect(Tok::Ttl)?;
        self.expect(Tok::LParen)?;
        self.expect(Tok::LBracket)?;
        let mut odes = Vec::new();
        loop {
            odes.push(self.ode(true)?);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::RBracket)?;
        self.expect(Tok::Comma)?;
        let invariant = self.condition()?;
        self.expect(Tok::Comma)?;
        self.expect(Tok::LBrace)?;
        let mut vars = Vec::new();
        loop {
            let (v, pos) = self.ident()?;
            if !matches!(self.lookup(&v), Some(Entity::Cont)) {
                return Err(type_error(pos, &format!("`{v}` is not a continuous variable")));
            }
            vars.push(v);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::RBrace)?;
        self.expect(Tok::RParen)?;
        Ok((
            Expr::Ttl(TtlCall {
                odes,
                invariant: Box::new(invariant),
                vars,
            }),
            Ty::Bool,
        ))
    }
}

enum Declarator {
    Signal(SignalDecl),
    Cont(ContDecl),
}

fn type_error(pos: Pos, msg: &str) -> SyntaxError {
    SyntaxError::Type {
        pos,
        msg: msg.to_string(),
    }
}

fn check_assignable(target: Ty, value: Ty, pos: Pos) -> PResult<()> {
    let ok = match target {
        Ty::Bool => value == Ty::Bool,
        Ty::Int => value == Ty::Int,
        Ty::Ratio => value.is_num(),
    };
    if ok {
        Ok(())
    } else {
        Err(type_error(
            pos,
            &format!("cannot assign a {} to a {}", value.name(), target.name()),
        ))
    }
}

fn binary_type(op: BinOp, l: Ty, r: Ty) -> Option<Ty> {
    match op {
        BinOp::Or | BinOp::And => (l == Ty::Bool && r == Ty::Bool).then_some(Ty::Bool),
        BinOp::Eq | BinOp::Ne => {
            ((l.is_num() && r.is_num()) || (l == Ty::Bool && r == Ty::Bool)).then_some(Ty::Bool)
        }
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            (l.is_num() && r.is_num()).then_some(Ty::Bool)
        }
        BinOp::Add | BinOp::Sub | BinOp::Mul => {
            if l == Ty::Int && r == Ty::Int {
                Some(Ty::Int)
            } else if l.is_num() && r.is_num() {
                Some(Ty::Ratio)
            } else {
                None
            }
        }
    }
}
