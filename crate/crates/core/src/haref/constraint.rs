//! Linear constraints `Σ kᵢ·xᵢ + k  op  Σ …` with rational coefficients,
//! and their exact solution sets along constant-slope trajectories.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::HaError;
use crate::rational::Rational;

pub type Valuation = BTreeMap<String, Rational>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cmp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Cmp {
    fn holds(self, lhs: &Rational) -> bool {
        let z = Rational::zero();
        match self {
            Cmp::Lt => lhs < &z,
            Cmp::Le => lhs <= &z,
            Cmp::Eq => lhs == &z,
            Cmp::Ge => lhs >= &z,
            Cmp::Gt => lhs > &z,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Eq => "==",
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
        }
    }
}

/// `Σ coeffs·x + constant  op  0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub coeffs: BTreeMap<String, Rational>,
    pub constant: Rational,
    pub op: Cmp,
}

/// A conjunction of atoms; empty means `true`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub atoms: Vec<Atom>,
}

/// A set of times `t >= 0` given by its bounds; `None` is unbounded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interval {
    pub lo: Rational,
    pub lo_open: bool,
    pub hi: Option<Rational>,
    pub hi_open: bool,
}

impl Interval {
    fn all() -> Self {
        Interval {
            lo: Rational::zero(),
            lo_open: false,
            hi: None,
            hi_open: false,
        }
    }

    pub fn is_empty(&self) -> bool {
        match &self.hi {
            None => false,
            Some(hi) => hi < &self.lo || (hi == &self.lo && (self.lo_open || self.hi_open)),
        }
    }

    fn intersect(&self, o: &Interval) -> Interval {
        let (lo, lo_open) = if self.lo > o.lo {
            (self.lo.clone(), self.lo_open)
        } else if o.lo > self.lo {
            (o.lo.clone(), o.lo_open)
        } else {
            (self.lo.clone(), self.lo_open || o.lo_open)
        };
        let (hi, hi_open) = match (&self.hi, &o.hi) {
            (None, None) => (None, false),
            (Some(h), None) => (Some(h.clone()), self.hi_open),
            (None, Some(h)) => (Some(h.clone()), o.hi_open),
            (Some(a), Some(b)) if a < b => (Some(a.clone()), self.hi_open),
            (Some(a), Some(b)) if b < a => (Some(b.clone()), o.hi_open),
            (Some(a), Some(_)) => (Some(a.clone()), self.hi_open || o.hi_open),
        };
        Interval { lo, lo_open, hi, hi_open }
    }

    pub fn contains(&self, t: &Rational) -> bool {
        let above = if self.lo_open { t > &self.lo } else { t >= &self.lo };
        let below = match &self.hi {
            None => true,
            Some(h) if self.hi_open => t < h,
            Some(h) => t <= h,
        };
        above && below
    }
}

impl Atom {
    fn value_at(&self, v: &Valuation) -> Rational {
        self.coeffs
            .iter()
            .map(|(x, k)| k * v.get(x).unwrap_or(&Rational::zero()))
            .fold(self.constant.clone(), |a, b| a + b)
    }

    pub fn holds(&self, v: &Valuation) -> bool {
        self.op.holds(&self.value_at(v))
    }

    /// Times `t >= 0` at which the atom holds along `v + rates·t`. Atoms
    /// are affine in `t`, so the solution set is an interval.
    fn interval(&self, v: &Valuation, rates: &Valuation) -> Interval {
        let p = self.value_at(v);
        let q: Rational = self
            .coeffs
            .iter()
            .map(|(x, k)| k * rates.get(x).unwrap_or(&Rational::zero()))
            .sum();
        let never = Interval {
            lo: Rational::one(),
            lo_open: false,
            hi: Some(Rational::zero()),
            hi_open: false,
        };
        if q.is_zero() {
            return if self.op.holds(&p) { Interval::all() } else { never };
        }
        // p + q·t op 0  ⇔  t op' root
        let root = -(&p * &q.recip().expect("non-zero"));
        let flipped = q.is_negative();
        let op = match (self.op, flipped) {
            (Cmp::Lt, false) | (Cmp::Gt, true) => Cmp::Lt,
            (Cmp::Le, false) | (Cmp::Ge, true) => Cmp::Le,
            (Cmp::Ge, false) | (Cmp::Le, true) => Cmp::Ge,
            (Cmp::Gt, false) | (Cmp::Lt, true) => Cmp::Gt,
            (Cmp::Eq, _) => Cmp::Eq,
        };
        let nonneg = |r: Rational| if r.is_negative() { Rational::zero() } else { r };
        let i = match op {
            Cmp::Lt => Interval {
                hi: Some(root),
                hi_open: true,
                ..Interval::all()
            },
            Cmp::Le => Interval {
                hi: Some(root),
                ..Interval::all()
            },
            Cmp::Eq => Interval {
                lo: root.clone(),
                lo_open: false,
                hi: Some(root),
                hi_open: false,
            },
            Cmp::Ge => Interval {
                lo: root,
                ..Interval::all()
            },
            Cmp::Gt => Interval {
                lo: root,
                lo_open: true,
                ..Interval::all()
            },
        };
        if i.lo.is_negative() {
            let lo = nonneg(i.lo.clone());
            // a bound below zero no longer constrains t >= 0
            return Interval { lo, lo_open: false, ..i };
        }
        i
    }
}

impl Constraint {
    pub fn holds(&self, v: &Valuation) -> bool {
        self.atoms.iter().all(|a| a.holds(v))
    }

    /// Times `t >= 0` at which every atom holds along `v + rates·t`.
    pub fn interval(&self, v: &Valuation, rates: &Valuation) -> Interval {
        self.atoms
            .iter()
            .fold(Interval::all(), |acc, a| acc.intersect(&a.interval(v, rates)))
    }

    pub fn variables(&self) -> impl Iterator<Item = &String> {
        self.atoms.iter().flat_map(|a| a.coeffs.keys())
    }

    /// Parses `e1 op e2 && …` where each side is a sum of terms `k`,
    /// `x`, `k*x` or `k x`; names found in `constants` are substituted.
    pub fn parse(text: &str, constants: &BTreeMap<String, Rational>) -> Result<Constraint, HaError> {
        let text = text.trim();
        if text.is_empty() || text == "true" {
            return Ok(Constraint::default());
        }
        let atoms = text
            .split("&&")
            .map(|a| parse_atom(a, constants).map_err(|msg| HaError::Constraint { text: text.into(), msg }))
            .collect::<Result<_, _>>()?;
        Ok(Constraint { atoms })
    }
}

type Linear = (BTreeMap<String, Rational>, Rational);

fn parse_atom(text: &str, constants: &BTreeMap<String, Rational>) -> Result<Atom, String> {
    let ops = [("<=", Cmp::Le), (">=", Cmp::Ge), ("==", Cmp::Eq), ("<", Cmp::Lt), (">", Cmp::Gt)];
    let (at, sym, op) = ops
        .iter()
        .filter_map(|(s, op)| text.find(s).map(|i| (i, *s, *op)))
        .min_by_key(|(i, s, _)| (*i, usize::MAX - s.len()))
        .ok_or_else(|| format!("no comparison in `{}`", text.trim()))?;
    let (lhs, rhs) = (&text[..at], &text[at + sym.len()..]);
    let (mut coeffs, mut constant) = parse_linear(lhs, constants)?;
    let (rc, rk) = parse_linear(rhs, constants)?;
    for (x, k) in rc {
        let e = coeffs.entry(x).or_insert_with(Rational::zero);
        *e = &*e - &k;
    }
    constant = constant - rk;
    coeffs.retain(|_, k| !k.is_zero());
    Ok(Atom { coeffs, constant, op })
}

fn parse_linear(text: &str, constants: &BTreeMap<String, Rational>) -> Result<Linear, String> {
    let mut coeffs: BTreeMap<String, Rational> = BTreeMap::new();
    let mut constant = Rational::zero();
    let spaced = text.replace('-', " - ").replace('+', " + ").replace('*', " * ");
    let mut sign = Rational::one();
    let mut factor: Option<Rational> = None;
    let mut expect_term = true;
    let flush = |factor: &mut Option<Rational>, sign: &Rational, constant: &mut Rational| {
        if let Some(f) = factor.take() {
            *constant = &*constant + &(sign * &f);
        }
    };
    for tok in spaced.split_whitespace() {
        match tok {
            "+" | "-" => {
                flush(&mut factor, &sign, &mut constant);
                if expect_term && factor.is_none() && tok == "-" {
                    sign = -sign;
                } else {
                    sign = if tok == "-" { -Rational::one() } else { Rational::one() };
                }
                expect_term = true;
            }
            "*" => {
                if factor.is_none() {
                    return Err("`*` without a coefficient".into());
                }
            }
            _ => {
                if let Ok(k) = tok.parse::<Rational>() {
                    factor = Some(factor.map_or(k.clone(), |f| f * k));
                } else if let Some(k) = constants.get(tok) {
                    factor = Some(factor.map_or(k.clone(), |f| f * k));
                } else if tok.chars().all(|c| c.is_alphanumeric() || c == '_') {
                    let k = &sign * &factor.take().unwrap_or_else(Rational::one);
                    let e = coeffs.entry(tok.to_string()).or_insert_with(Rational::zero);
                    *e = &*e + &k;
                    sign = Rational::one();
                } else {
                    return Err(format!("unexpected `{tok}`"));
                }
                expect_term = false;
            }
        }
    }
    flush(&mut factor, &sign, &mut constant);
    if expect_term && !text.trim().is_empty() {
        return Err(format!("dangling operator in `{}`", text.trim()));
    }
    if text.trim().is_empty() {
        return Err("empty side of a comparison".into());
    }
    Ok((coeffs, constant))
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return write!(f, "true");
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                write!(f, " && ")?;
            }
            let terms: Vec<String> = a.coeffs.iter().map(|(x, k)| format!("{k}*{x}")).collect();
            write!(f, "{} + {} {} 0", terms.join(" + "), a.constant, a.op.symbol())?;
        }
        Ok(())
    }
}
