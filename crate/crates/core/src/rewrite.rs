//! Desugaring of flow actions into base-language temporal loops.
//!
//! `do {v' = ρ || …} until (e)` becomes
//!
//! ```text
//! signal R#n;
//! abort (R#n) loop {
//!   v = v + ρ * WCRT; …            // one assignment per ODE, source order
//!   if (!TTL([v' = ρ, …], e, {v, …})) emit R#n;
//!   pause
//! }
//! ```
//!
//! and `until (true)` becomes `loop { v = v + ρ * WCRT; …; pause }`, which
//! only an enclosing preemption can stop. The reaction time is folded in as
//! the parameter `WCRT`, declared in the output program.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;
use crate::syntax::{
    BinOp, CombineOp, ContDecl, Expr, Name, Ode, ParamDecl, Program, SignalDecl, Stmt, TtlCall,
};
use crate::ttl::TtlMode;

pub const WCRT_PARAM: &str = "WCRT";
const FRESH_PREFIX: &str = "R#";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("reaction time must be strictly positive, got {0}")]
pub struct NonPositiveWcrt(pub Rational);

/// Discretisation settings shared by the rewrite and the kernel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteConfig {
    pub wcrt: Rational,
    #[serde(default)]
    pub ttl_mode: TtlMode,
}

impl RewriteConfig {
    pub fn new(wcrt: Rational) -> Result<Self, NonPositiveWcrt> {
        if wcrt.is_positive() {
            Ok(RewriteConfig {
                wcrt,
                ttl_mode: TtlMode::default(),
            })
        } else {
            Err(NonPositiveWcrt(wcrt))
        }
    }

    pub fn with_ttl_mode(mut self, mode: TtlMode) -> Self {
        self.ttl_mode = mode;
        self
    }
}

/// One flow action together with what the look-ahead needs about it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowSite {
    pub odes: Vec<Ode>,
    pub invariant: Expr,
    /// Distinct flow variables in order of first appearance.
    pub vars: Vec<Name>,
    /// Combine operator of every flow variable that has one.
    pub combine: BTreeMap<Name, CombineOp>,
}

impl FlowSite {
    /// True when some variable has more than one ODE in this flow, so the
    /// look-ahead needs the combine-aware algorithm.
    pub fn needs_combine(&self) -> bool {
        self.vars
            .iter()
            .any(|v| self.odes.iter().filter(|o| &o.var == v).count() > 1)
    }
}

pub fn flow_vars(odes: &[Ode]) -> Vec<Name> {
    let mut vars: Vec<Name> = Vec::new();
    for o in odes {
        if !vars.contains(&o.var) {
            vars.push(o.var.clone());
        }
    }
    vars
}

/// Every flow action in the program, in pre-order.
pub fn flow_sites(program: &Program) -> Vec<FlowSite> {
    fn go(s: &Stmt, scope: &mut Vec<(Name, Option<CombineOp>)>, out: &mut Vec<FlowSite>) {
        match s {
            Stmt::DoUntil { odes, invariant } => {
                let vars = flow_vars(odes);
                let combine = vars
                    .iter()
                    .filter_map(|v| {
                        let op = scope.iter().rev().find(|(n, _)| n == v)?.1?;
                        Some((v.clone(), op))
                    })
                    .collect();
                out.push(FlowSite {
                    odes: odes.clone(),
                    invariant: invariant.clone(),
                    vars,
                    combine,
                });
            }
            Stmt::Cont(d) => {
                scope.push((d.name.clone(), d.combine));
                go(&d.body, scope, out);
                scope.pop();
            }
            Stmt::Signal(d) => {
                scope.push((d.name.clone(), None));
                go(&d.body, scope, out);
                scope.pop();
            }
            Stmt::Abort { body, .. }
            | Stmt::Suspend { body, .. }
            | Stmt::Loop(body)
            | Stmt::Label(_, body) => go(body, scope, out),
            Stmt::If { then, els, .. } | Stmt::Seq(then, els) | Stmt::Par(then, els) => {
                go(then, scope, out);
                go(els, scope, out);
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    go(&program.root, &mut Vec::new(), &mut out);
    out
}

/// True for names only the rewriter can produce.
pub fn is_generated(name: &str) -> bool {
    name.contains('#')
}

/// Replaces every flow action with its discrete temporal loop. Programs
/// without flow actions come back unchanged.
pub fn rewrite_flows(program: &Program, cfg: &RewriteConfig) -> Program {
    if !program.root.contains_do_until() {
        return program.clone();
    }
    let step = match program.param(WCRT_PARAM) {
        None => Step::Param(cfg.wcrt.clone()),
        Some(v) if *v == cfg.wcrt => Step::Param(cfg.wcrt.clone()),
        // a user parameter of that name means something else: fold literally
        Some(_) => Step::Literal(cfg.wcrt.clone()),
    };
    let mut rw = Rewriter {
        next: max_generated_suffix(&program.root) + 1,
        step,
    };
    let root = rw.stmt(&program.root);
    let mut params = program.params.clone();
    if matches!(rw.step, Step::Param(_)) && program.param(WCRT_PARAM).is_none() {
        params.insert(
            0,
            ParamDecl {
                name: WCRT_PARAM.into(),
                value: cfg.wcrt.clone(),
            },
        );
    }
    Program { params, root }
}

fn max_generated_suffix(s: &Stmt) -> u64 {
    let mut max = 0;
    s.visit(&mut |s| {
        if let Stmt::Signal(SignalDecl { name, .. }) | Stmt::Cont(ContDecl { name, .. }) = s {
            if let Some((_, digits)) = name.rsplit_once('#') {
                max = max.max(digits.parse().unwrap_or(0));
            }
        }
    });
    max
}

enum Step {
    Param(Rational),
    Literal(Rational),
}

struct Rewriter {
    next: u64,
    step: Step,
}

impl Rewriter {
    fn increment(&self, rate: &Rational) -> Expr {
        match &self.step {
            Step::Literal(w) => Expr::Num(rate * w),
            Step::Param(w) => {
                let wcrt = Expr::Param(WCRT_PARAM.into(), w.clone());
                if *rate == Rational::one() {
                    wcrt
                } else {
                    Expr::binary(BinOp::Mul, Expr::Num(rate.clone()), wcrt)
                }
            }
        }
    }

    fn flow(&mut self, odes: &[Ode], invariant: &Expr) -> Stmt {
        let mut body: Vec<Stmt> = odes
            .iter()
            .map(|o| {
                Stmt::Assign(
                    o.var.clone(),
                    Expr::binary(BinOp::Add, Expr::Cont(o.var.clone()), self.increment(&o.rate)),
                )
            })
            .collect();
        if invariant.is_true_literal() {
            body.push(Stmt::Pause);
            return Stmt::Loop(Box::new(Stmt::seq_all(body)));
        }
        let r = format!("{FRESH_PREFIX}{}", self.next);
        self.next += 1;
        body.push(Stmt::If {
            cond: Expr::negated(Expr::Ttl(TtlCall {
                odes: odes.to_vec(),
                invariant: Box::new(invariant.clone()),
                vars: flow_vars(odes),
            })),
            then: Box::new(Stmt::Emit(r.clone())),
            els: Box::new(Stmt::Nothing),
        });
        body.push(Stmt::Pause);
        Stmt::Signal(SignalDecl {
            direction: None,
            ty: None,
            name: r.clone(),
            combine: None,
            init: None,
            body: Box::new(Stmt::Abort {
                immediate: false,
                guard: Expr::Status(r),
                body: Box::new(Stmt::Loop(Box::new(Stmt::seq_all(body)))),
            }),
        })
    }

    fn stmt(&mut self, s: &Stmt) -> Stmt {
        let b = |this: &mut Self, s: &Stmt| Box::new(this.stmt(s));
        match s {
            Stmt::DoUntil { odes, invariant } => self.flow(odes, invariant),
            Stmt::Abort {
                immediate,
                guard,
                body,
            } => Stmt::Abort {
                immediate: *immediate,
                guard: guard.clone(),
                body: b(self, body),
            },
            Stmt::Suspend {
                immediate,
                guard,
                body,
            } => Stmt::Suspend {
                immediate: *immediate,
                guard: guard.clone(),
                body: b(self, body),
            },
            Stmt::If { cond, then, els } => Stmt::If {
                cond: cond.clone(),
                then: b(self, then),
                els: b(self, els),
            },
            Stmt::Signal(d) => Stmt::Signal(SignalDecl {
                body: b(self, &d.body),
                ..d.clone()
            }),
            Stmt::Cont(d) => Stmt::Cont(ContDecl {
                body: b(self, &d.body),
                ..d.clone()
            }),
            Stmt::Loop(body) => Stmt::Loop(b(self, body)),
            Stmt::Label(l, body) => Stmt::Label(l.clone(), b(self, body)),
            // re-associate so flows expanding into sequences stay right-nested
            Stmt::Seq(x, y) => Stmt::seq(self.stmt(x), self.stmt(y)),
            Stmt::Par(x, y) => Stmt::Par(b(self, x), b(self, y)),
            Stmt::Nothing
            | Stmt::Emit(_)
            | Stmt::ValueWrite(..)
            | Stmt::Pause
            | Stmt::Assign(..) => s.clone(),
        }
    }
}
