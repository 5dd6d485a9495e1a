//! Static check on simultaneous writers of continuous variables.

use std::collections::BTreeMap;

use thiserror::Error;

use super::ast::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CombineError {
    #[error("continuous variable `{var}` has simultaneous writers combined with `op*`, which models a higher-order ODE")]
    NonLinear { var: Name },
    #[error("continuous variable `{var}` has simultaneous writers but no combine operator")]
    MissingCombine { var: Name },
}

/// Rejects continuous variables written from more than one simultaneous
/// site (several ODEs in one `do` block, or writers on both sides of a
/// `||`) unless they are declared with the linear combine `op+`.
///
/// Names are resolved lexically, so a shadowing declaration is checked
/// against its own combine operator.
pub fn reject_nonlinear_combine(program: &Program) -> Result<(), CombineError> {
    walk(&program.root, &mut Vec::new())
}

/// Lexical scope of continuous variables: name, combine op and the address
/// of the declaring node, which identifies the variable uniquely.
/// Signals push `None` so they shadow outer variables of the same name.
type Scope = Vec<(Name, Option<(Option<CombineOp>, usize)>)>;

fn lookup(scope: &Scope, name: &str) -> Option<(Option<CombineOp>, usize)> {
    scope.iter().rev().find(|(n, _)| n == name).and_then(|(_, e)| *e)
}

fn demand(op: Option<CombineOp>, var: &str) -> Result<(), CombineError> {
    match op {
        Some(CombineOp::Plus) => Ok(()),
        Some(CombineOp::Times) => Err(CombineError::NonLinear { var: var.into() }),
        None => Err(CombineError::MissingCombine { var: var.into() }),
    }
}

/// Continuous variables written anywhere in `s`, keyed by declaration.
fn written(s: &Stmt, scope: &mut Scope, out: &mut BTreeMap<usize, (Name, Option<CombineOp>)>) {
    let mut record = |scope: &Scope, v: &Name| {
        if let Some((op, id)) = lookup(scope, v) {
            out.insert(id, (v.clone(), op));
        }
    };
    match s {
        Stmt::Assign(v, _) => record(scope, v),
        Stmt::DoUntil { odes, .. } => odes.iter().for_each(|o| record(scope, &o.var)),
        Stmt::Cont(d) => {
            scope.push((d.name.clone(), Some((d.combine, d as *const ContDecl as usize))));
            written(&d.body, scope, out);
            scope.pop();
        }
        Stmt::Signal(d) => {
            scope.push((d.name.clone(), None));
            written(&d.body, scope, out);
            scope.pop();
        }
        Stmt::Abort { body, .. }
        | Stmt::Suspend { body, .. }
        | Stmt::Loop(body)
        | Stmt::Label(_, body) => written(body, scope, out),
        Stmt::If { then, els, .. } => {
            written(then, scope, out);
            written(els, scope, out);
        }
        Stmt::Seq(a, b) | Stmt::Par(a, b) => {
            written(a, scope, out);
            written(b, scope, out);
        }
        Stmt::Nothing | Stmt::Emit(_) | Stmt::ValueWrite(..) | Stmt::Pause => {}
    }
}

fn walk(s: &Stmt, scope: &mut Scope) -> Result<(), CombineError> {
    match s {
        Stmt::DoUntil { odes, .. } => {
            let mut count: BTreeMap<&str, usize> = BTreeMap::new();
            for o in odes {
                *count.entry(&o.var).or_default() += 1;
            }
            for (var, n) in count {
                if n > 1 {
                    if let Some((op, _)) = lookup(scope, var) {
                        demand(op, var)?;
                    }
                }
            }
            Ok(())
        }
        Stmt::Par(a, b) => {
            let (mut left, mut right) = (BTreeMap::new(), BTreeMap::new());
            written(a, scope, &mut left);
            written(b, scope, &mut right);
            for (id, (var, op)) in &left {
                if right.contains_key(id) {
                    demand(*op, var)?;
                }
            }
            walk(a, scope)?;
            walk(b, scope)
        }
        Stmt::Cont(d) => {
            scope.push((d.name.clone(), Some((d.combine, d as *const ContDecl as usize))));
            let r = walk(&d.body, scope);
            scope.pop();
            r
        }
        Stmt::Signal(d) => {
            scope.push((d.name.clone(), None));
            let r = walk(&d.body, scope);
            scope.pop();
            r
        }
        Stmt::Abort { body, .. }
        | Stmt::Suspend { body, .. }
        | Stmt::Loop(body)
        | Stmt::Label(_, body) => walk(body, scope),
        Stmt::If { then, els, .. } | Stmt::Seq(then, els) => {
            walk(then, scope)?;
            walk(els, scope)
        }
        Stmt::Nothing
        | Stmt::Emit(_)
        | Stmt::ValueWrite(..)
        | Stmt::Pause
        | Stmt::Assign(..) => Ok(()),
    }
}
