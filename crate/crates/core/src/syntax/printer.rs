//! Pretty-printer whose output parses back to a structurally equal AST.

use std::fmt::Write;

use super::ast::*;

pub fn pretty_print(program: &Program) -> String {
    let mut p = Printer::default();
    for param in &program.params {
        let _ = writeln!(p.out, "param {} = {};", param.name, param.value);
    }
    p.stmt(&program.root, Ctx::Top);
    p.out.push('\n');
    p.out
}

/// Prints an expression in a context where `||` means boolean or.
pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    expr(&mut s, e, true);
    s
}

/// Syntactic position a statement is printed in; decides where braces
/// are needed to preserve structure.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Ctx {
    /// Whole block content: anything goes.
    Top,
    /// Left operand of `||`: a `stmt0`, no declarations.
    ParLeft,
    /// First element of `;`: a `stmt1`.
    SeqFirst,
    /// Tail of `;`: a `stmt0` or declaration, but no `||`.
    SeqRest,
    /// Body of a compound statement: a `stmt1`.
    Atom,
}

#[derive(Default)]
struct Printer {
    out: String,
    indent: usize,
}

impl Printer {
    fn newline(&mut self) {
        self.out.push('\n');
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
    }

    fn braced(&mut self, s: &Stmt) {
        self.out.push('{');
        self.indent += 1;
        self.newline();
        self.stmt(s, Ctx::Top);
        self.indent -= 1;
        self.newline();
        self.out.push('}');
    }

    fn needs_braces(s: &Stmt, ctx: Ctx) -> bool {
        match s {
            Stmt::Par(..) => ctx != Ctx::Top,
            Stmt::Seq(_, rest) => {
                matches!(ctx, Ctx::SeqFirst | Ctx::Atom)
                    || (ctx == Ctx::ParLeft && ends_in_decl(rest))
            }
            Stmt::Signal(_) | Stmt::Cont(_) => ctx != Ctx::Top && ctx != Ctx::SeqRest,
            _ => false,
        }
    }

    fn stmt(&mut self, s: &Stmt, ctx: Ctx) {
        if Self::needs_braces(s, ctx) {
            self.braced(s);
            return;
        }
        match s {
            Stmt::Nothing => self.out.push_str("nothing"),
            Stmt::Pause => self.out.push_str("pause"),
            Stmt::Emit(n) => {
                let _ = write!(self.out, "emit {n}");
            }
            Stmt::ValueWrite(n, e) => {
                let _ = write!(self.out, "?{n} = ");
                expr(&mut self.out, e, false);
            }
            Stmt::Assign(n, e) => {
                let _ = write!(self.out, "{n} = ");
                expr(&mut self.out, e, false);
            }
            Stmt::Abort {
                immediate,
                guard,
                body,
            }
            | Stmt::Suspend {
                immediate,
                guard,
                body,
            } => {
                let kw = if matches!(s, Stmt::Abort { .. }) {
                    "abort"
                } else {
                    "suspend"
                };
                let imm = if *immediate { "immediate " } else { "" };
                let _ = write!(self.out, "{kw} ({imm}");
                expr(&mut self.out, guard, true);
                self.out.push_str(") ");
                self.body(body);
            }
            Stmt::If { cond, then, els } => {
                self.out.push_str("if (");
                expr(&mut self.out, cond, true);
                self.out.push_str(") ");
                // an `if` without else inside the then-branch would capture ours
                if matches!(**then, Stmt::If { .. }) {
                    self.braced(then);
                } else {
                    self.body(then);
                }
                if **els != Stmt::Nothing {
                    self.out.push_str(" else ");
                    self.body(els);
                }
            }
            Stmt::Loop(body) => {
                self.out.push_str("loop ");
                self.body(body);
            }
            Stmt::Label(name, body) => {
                let _ = write!(self.out, "{name}: ");
                self.stmt(body, Ctx::Atom);
            }
            Stmt::DoUntil { odes, invariant } => {
                self.out.push_str("do {");
                for (i, o) in odes.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(" || ");
                    }
                    let _ = write!(self.out, "{}' = {}", o.var, o.rate);
                }
                self.out.push_str("} until (");
                expr(&mut self.out, invariant, true);
                self.out.push(')');
            }
            Stmt::Seq(a, b) => {
                self.stmt(a, Ctx::SeqFirst);
                self.out.push(';');
                self.newline();
                self.stmt(b, Ctx::SeqRest);
            }
            Stmt::Par(a, b) => {
                self.stmt(a, Ctx::ParLeft);
                self.newline();
                self.out.push_str("||");
                self.newline();
                self.stmt(b, Ctx::Top);
            }
            Stmt::Signal(d) => {
                if let Some(dir) = d.direction {
                    self.out.push_str(match dir {
                        Direction::Input => "input ",
                        Direction::Output => "output ",
                    });
                }
                if let Some(ty) = d.ty {
                    let _ = write!(self.out, "{} ", ty.keyword());
                }
                let _ = write!(self.out, "signal {}", d.name);
                self.decl_tail(d.combine, d.init.as_ref());
                self.decl_body(&d.body);
            }
            Stmt::Cont(d) => {
                let _ = write!(self.out, "cont {}", d.name);
                self.decl_tail(d.combine, d.init.as_ref());
                self.decl_body(&d.body);
            }
        }
    }

    fn body(&mut self, s: &Stmt) {
        if matches!(s, Stmt::Seq(..) | Stmt::Par(..) | Stmt::Signal(_) | Stmt::Cont(_)) {
            self.braced(s);
        } else {
            self.stmt(s, Ctx::Atom);
        }
    }

    fn decl_tail(&mut self, combine: Option<CombineOp>, init: Option<&Expr>) {
        if let Some(op) = combine {
            let _ = write!(self.out, " {}", op.keyword());
        }
        if let Some(e) = init {
            self.out.push_str(" = ");
            expr(&mut self.out, e, false);
        }
    }

    fn decl_body(&mut self, body: &Stmt) {
        self.out.push(';');
        if *body != Stmt::Nothing {
            self.newline();
            self.stmt(body, Ctx::Top);
        }
    }
}

/// A declaration at the end of a `;` chain would swallow a following `||`.
fn ends_in_decl(s: &Stmt) -> bool {
    match s {
        Stmt::Signal(_) | Stmt::Cont(_) => true,
        Stmt::Seq(_, rest) => ends_in_decl(rest),
        _ => false,
    }
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, ..) => op.precedence(),
        _ => u8::MAX,
    }
}

fn expr(out: &mut String, e: &Expr, allow_or: bool) {
    match e {
        Expr::Num(n) => {
            let _ = write!(out, "{n}");
        }
        Expr::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Expr::Status(n) | Expr::Cont(n) | Expr::Param(n, _) => out.push_str(n),
        Expr::Value(n) => {
            let _ = write!(out, "?{n}");
        }
        Expr::Unary(op, inner) => {
            out.push(match op {
                UnOp::Not => '!',
                UnOp::Neg => '-',
            });
            let wrap = matches!(**inner, Expr::Binary(..))
                || matches!(**inner, Expr::Num(ref n) if n.is_negative());
            if wrap {
                out.push('(');
                expr(out, inner, true);
                out.push(')');
            } else {
                expr(out, inner, allow_or);
            }
        }
        Expr::Binary(op, a, b) => {
            let p = op.precedence();
            if *op == BinOp::Or && !allow_or {
                out.push('(');
                expr(out, e, true);
                out.push(')');
                return;
            }
            let left_wrap = if op.is_comparison() {
                prec(a) <= p
            } else {
                prec(a) < p
            };
            operand(out, a, left_wrap, allow_or);
            let _ = write!(out, " {} ", op.symbol());
            operand(out, b, prec(b) <= p, allow_or);
        }
        Expr::Ttl(call) => {
            out.push_str("TTL([");
            for (i, o) in call.odes.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{}' = {}", o.var, o.rate);
            }
            out.push_str("], ");
            expr(out, &call.invariant, true);
            out.push_str(", {");
            out.push_str(&call.vars.join(", "));
            out.push_str("})");
        }
    }
}

fn operand(out: &mut String, e: &Expr, wrap: bool, allow_or: bool) {
    if wrap {
        out.push('(');
        expr(out, e, true);
        out.push(')');
    } else {
        expr(out, e, allow_or);
    }
}
