//! Settled per-tick records and their CSV, JSON and SVG exports.
//!
//! Record `n` holds the state settled at the end of tick `n`, at physical
//! time `n · wcrt`; record 0 is the initial state. Exports never convert a
//! rational to floating point: values are printed as `p/q` (or `p`), and
//! SVG coordinates are rounded exactly to two decimals.

use std::collections::BTreeMap;
use std::fmt::{self, Write};

use num_bigint::BigInt;
use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;
use crate::rewrite::is_generated;
use crate::syntax::Name;
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    pub time: Rational,
    /// Settled status of every signal.
    pub statuses: BTreeMap<Name, bool>,
    /// Settled value of every valued signal.
    pub values: BTreeMap<Name, Value>,
    /// Settled value of every continuous variable.
    pub conts: BTreeMap<Name, Rational>,
    /// Whether each label's statement was started or resumed this tick.
    pub labels: BTreeMap<Name, bool>,
}

impl TickRecord {
    pub fn status(&self, name: &str) -> bool {
        self.statuses.get(name).copied().unwrap_or(false)
    }

    fn observable(&self) -> TickRecord {
        let keep = |k: &Name| !is_generated(k);
        TickRecord {
            tick: self.tick,
            time: self.time.clone(),
            statuses: self.statuses.iter().filter(|(k, _)| keep(k)).map(|(k, v)| (k.clone(), *v)).collect(),
            values: self.values.iter().filter(|(k, _)| keep(k)).map(|(k, v)| (k.clone(), v.clone())).collect(),
            conts: self.conts.iter().filter(|(k, _)| keep(k)).map(|(k, v)| (k.clone(), v.clone())).collect(),
            labels: self.labels.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub wcrt: Rational,
    pub records: Vec<TickRecord>,
    /// Tick boundary at which the program was found terminated: the
    /// reaction that completes the program starts at this boundary, so a
    /// program whose last action is a delayed abort is reported at the
    /// tick in which the abort's trigger was emitted.
    pub terminated_at: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    Status,
    Value,
    Cont,
    Label,
}

impl fmt::Display for RowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowKind::Status => "status",
            RowKind::Value => "value",
            RowKind::Cont => "cont",
            RowKind::Label => "label",
        })
    }
}

/// One settled datum: a CSV line.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TraceRow {
    pub tick: u64,
    pub time: Rational,
    pub entity: Name,
    pub kind: RowKind,
    pub datum: Value,
}

/// First point where two traces disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub tick: u64,
    pub entity: String,
    pub left: String,
    pub right: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tick {}: `{}` is {} vs {}",
            self.tick, self.entity, self.left, self.right
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("no entities selected for the timing diagram")]
    NoEntities,
    #[error("unknown trace entity `{0}`")]
    UnknownEntity(String),
    #[error("malformed trace JSON: {0}")]
    Json(String),
}

impl Trace {
    pub fn new(wcrt: Rational) -> Self {
        Trace {
            wcrt,
            records: Vec::new(),
            terminated_at: None,
        }
    }

    pub fn record(&self, tick: u64) -> Option<&TickRecord> {
        self.records.get(usize::try_from(tick).ok()?)
    }

    pub fn last(&self) -> Option<&TickRecord> {
        self.records.last()
    }

    /// Number of ticks executed (record 0 is the initial state).
    pub fn ticks(&self) -> u64 {
        self.records.len().saturating_sub(1) as u64
    }

    pub fn cont(&self, name: &str, tick: u64) -> Option<&Rational> {
        self.record(tick)?.conts.get(name)
    }

    pub fn status(&self, name: &str, tick: u64) -> Option<bool> {
        self.record(tick)?.statuses.get(name).copied()
    }

    pub fn value(&self, name: &str, tick: u64) -> Option<&Value> {
        self.record(tick)?.values.get(name)
    }

    pub fn label(&self, name: &str, tick: u64) -> Option<bool> {
        self.record(tick)?.labels.get(name).copied()
    }

    /// Settled values of a continuous variable, from record 0 on.
    pub fn cont_series(&self, name: &str) -> Vec<Rational> {
        self.records.iter().filter_map(|r| r.conts.get(name).cloned()).collect()
    }

    /// Ticks at which `signal` settled present.
    pub fn emissions(&self, signal: &str) -> Vec<u64> {
        self.records
            .iter()
            .filter(|r| r.status(signal))
            .map(|r| r.tick)
            .collect()
    }

    pub fn first_emission(&self, signal: &str) -> Option<u64> {
        self.emissions(signal).into_iter().next()
    }

    /// The trace with compiler-generated entities removed.
    pub fn observable(&self) -> Trace {
        Trace {
            wcrt: self.wcrt.clone(),
            records: self.records.iter().map(TickRecord::observable).collect(),
            terminated_at: self.terminated_at,
        }
    }

    /// Equality up to compiler-generated entities.
    pub fn observably_equal(&self, other: &Trace) -> bool {
        self.observable() == other.observable()
    }

    /// First observable disagreement, if any.
    pub fn first_divergence(&self, other: &Trace) -> Option<Divergence> {
        let (a, b) = (self.observable(), other.observable());
        let (ra, rb) = (a.rows(), b.rows());
        for (x, y) in ra.iter().zip(&rb) {
            if x != y {
                return Some(Divergence {
                    tick: x.tick.min(y.tick),
                    entity: if x.entity == y.entity {
                        format!("{} ({})", x.entity, x.kind)
                    } else {
                        format!("{} / {}", x.entity, y.entity)
                    },
                    left: x.datum.to_string(),
                    right: y.datum.to_string(),
                });
            }
        }
        if ra.len() != rb.len() {
            let longer = if ra.len() > rb.len() { &ra[rb.len()] } else { &rb[ra.len()] };
            return Some(Divergence {
                tick: longer.tick,
                entity: longer.entity.clone(),
                left: if ra.len() > rb.len() { longer.datum.to_string() } else { "missing".into() },
                right: if ra.len() > rb.len() { "missing".into() } else { longer.datum.to_string() },
            });
        }
        if a.terminated_at != b.terminated_at {
            let fmt = |t: Option<u64>| t.map_or("running".to_string(), |t| format!("terminated at {t}"));
            return Some(Divergence {
                tick: a.terminated_at.or(b.terminated_at).unwrap_or(0),
                entity: "<program>".into(),
                left: fmt(a.terminated_at),
                right: fmt(b.terminated_at),
            });
        }
        None
    }

    /// Rows sorted by (tick, entity, kind).
    pub fn rows(&self) -> Vec<TraceRow> {
        let mut rows = Vec::new();
        for r in &self.records {
            let mut push = |entity: &Name, kind, datum: Value| {
                rows.push(TraceRow {
                    tick: r.tick,
                    time: r.time.clone(),
                    entity: entity.clone(),
                    kind,
                    datum,
                })
            };
            for (k, v) in &r.statuses {
                push(k, RowKind::Status, Value::Bool(*v));
            }
            for (k, v) in &r.values {
                push(k, RowKind::Value, v.clone());
            }
            for (k, v) in &r.conts {
                push(k, RowKind::Cont, Value::Num(v.clone()));
            }
            for (k, v) in &r.labels {
                push(k, RowKind::Label, Value::Bool(*v));
            }
        }
        rows.sort_by(|a, b| (a.tick, &a.entity, a.kind).cmp(&(b.tick, &b.entity, b.kind)));
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tick,time,entity,kind,value\n");
        for row in self.rows() {
            let _ = writeln!(out, "{},{},{},{},{}", row.tick, row.time, row.entity, row.kind, row.datum);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialises")
    }

    pub fn from_json(text: &str) -> Result<Trace, TraceError> {
        serde_json::from_str(text).map_err(|e| TraceError::Json(e.to_string()))
    }

    /// Step-plot timing diagram with one lane per entity. Booleans
    /// (statuses, labels) are drawn as pulses, numbers as steps scaled to
    /// the lane, annotated with their exact values wherever they change.
    pub fn to_svg_timing(&self, entities: &[&str]) -> Result<String, TraceError> {
        if entities.is_empty() {
            return Err(TraceError::NoEntities);
        }
        let lanes = entities
            .iter()
            .map(|e| self.lane(e).ok_or_else(|| TraceError::UnknownEntity(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;

        const LEFT: i64 = 80;
        const STEP: i64 = 40;
        const LANE: i64 = 60;
        const AMP: i64 = 40;
        let n = self.records.len().max(1) as i64;
        let width = LEFT + n * STEP + 20;
        let height = lanes.len() as i64 * LANE + 30;
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="monospace" font-size="11">"#
        );
        let _ = writeln!(svg, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
        for (i, r) in self.records.iter().enumerate() {
            let x = LEFT + i as i64 * STEP;
            let _ = writeln!(
                svg,
                r##"<line x1="{x}" y1="10" x2="{x}" y2="{}" stroke="#ddd"/><text x="{}" y="{}">{}</text>"##,
                height - 20,
                x + 2,
                height - 6,
                r.time
            );
        }
        for (li, (name, lane)) in entities.iter().zip(&lanes).enumerate() {
            let base = 10 + li as i64 * LANE + AMP;
            let _ = writeln!(svg, r#"<text x="4" y="{}">{}</text>"#, base - AMP / 2, escape(name));
            let (lo, hi) = lane.range();
            let span = &hi - &lo;
            let y_of = |v: &Rational| -> Rational {
                if span.is_zero() {
                    Rational::from(base - AMP / 2)
                } else {
                    Rational::from(base) - Rational::from(AMP) * (v - &lo) * span.recip().expect("non-zero span")
                }
            };
            let mut path = String::new();
            let mut prev: Option<&Rational> = None;
            for (i, v) in lane.points.iter().enumerate() {
                let x0 = LEFT + i as i64 * STEP;
                let y = fixed2(&y_of(v));
                if i == 0 {
                    let _ = write!(path, "M{x0} {y}");
                } else {
                    let _ = write!(path, " L{x0} {y}");
                }
                let _ = write!(path, " L{} {y}", x0 + STEP);
                if !lane.boolean && prev != Some(v) {
                    let _ = writeln!(
                        svg,
                        r##"<text x="{}" y="{}" fill="#036">{}</text>"##,
                        x0 + 2,
                        fixed2(&(y_of(v) - Rational::from(3))),
                        v
                    );
                }
                prev = Some(v);
            }
            let _ = writeln!(svg, r##"<path d="{path}" fill="none" stroke="#c00" stroke-width="1.5"/>"##);
        }
        svg.push_str("</svg>\n");
        Ok(svg)
    }

    fn lane(&self, entity: &str) -> Option<Lane> {
        let mut points = Vec::new();
        let mut boolean = true;
        for r in &self.records {
            let v = if let Some(c) = r.conts.get(entity) {
                boolean = false;
                c.clone()
            } else if let Some(v) = r.values.get(entity) {
                match v {
                    Value::Num(n) => {
                        boolean = false;
                        n.clone()
                    }
                    Value::Bool(b) => Rational::from(*b as i64),
                }
            } else {
                let s = r.statuses.get(entity).or_else(|| r.labels.get(entity))?;
                Rational::from(*s as i64)
            };
            points.push(v);
        }
        if points.is_empty() {
            return None;
        }
        Some(Lane { points, boolean })
    }
}

struct Lane {
    points: Vec<Rational>,
    boolean: bool,
}

impl Lane {
    fn range(&self) -> (Rational, Rational) {
        if self.boolean {
            return (Rational::zero(), Rational::one());
        }
        let lo = self.points.iter().min().cloned().unwrap_or_default();
        let hi = self.points.iter().max().cloned().unwrap_or_default();
        (lo, hi)
    }
}

/// Exact rounding (half away from zero) to two decimals.
fn fixed2(r: &Rational) -> String {
    let scaled = r.numer() * BigInt::from(100);
    let d = r.denom();
    let (q, rem) = scaled.div_rem(d);
    let twice: BigInt = rem.clone() * 2;
    let q = if twice.magnitude() >= d.magnitude() {
        if scaled.sign() == num_bigint::Sign::Minus { q - 1 } else { q + 1 }
    } else {
        q
    };
    let neg = q.sign() == num_bigint::Sign::Minus;
    let mag = q.magnitude().to_string();
    let mag = format!("{mag:0>3}");
    let (int, frac) = mag.split_at(mag.len() - 2);
    format!("{}{int}.{frac}", if neg { "-" } else { "" })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trace {
        let mut t = Trace::new(Rational::from(2));
        for (tick, a) in [(0, 0), (1, 2), (2, 2)] {
            t.records.push(TickRecord {
                tick,
                time: Rational::from(2 * tick as i64),
                statuses: [("R#1".to_string(), tick == 1), ("S".to_string(), false)].into(),
                values: BTreeMap::new(),
                conts: [("a".to_string(), Rational::from(a))].into(),
                labels: BTreeMap::new(),
            });
        }
        t.terminated_at = Some(1);
        t
    }

    #[test]
    fn csv_is_sorted_and_exact() {
        let csv = sample().to_csv();
        assert!(csv.starts_with("tick,time,entity,kind,value\n"));
        assert!(csv.contains("1,2,a,cont,2\n"));
        assert!(csv.contains("1,2,R#1,status,true\n"));
        assert_eq!(Trace::new(Rational::one()).to_csv(), "tick,time,entity,kind,value\n");
    }

    #[test]
    fn json_round_trip() {
        let t = sample();
        assert_eq!(Trace::from_json(&t.to_json()).unwrap(), t);
    }

    #[test]
    fn generated_names_are_not_observable() {
        let mut other = sample();
        for r in &mut other.records {
            r.statuses.insert("R#1".into(), false);
        }
        assert!(sample().observably_equal(&other));
        other.records[2].conts.insert("a".into(), Rational::from(3));
        let d = sample().first_divergence(&other).unwrap();
        assert_eq!(d.tick, 2);
    }

    #[test]
    fn svg_lanes() {
        let svg = sample().to_svg_timing(&["a", "R#1"]).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<path").count(), 2);
        assert_eq!(sample().to_svg_timing(&[]), Err(TraceError::NoEntities));
        assert!(matches!(
            sample().to_svg_timing(&["nope"]),
            Err(TraceError::UnknownEntity(_))
        ));
    }

    #[test]
    fn exact_rounding() {
        assert_eq!(fixed2(&Rational::new(1, 3)), "0.33");
        assert_eq!(fixed2(&Rational::new(-5, 8)), "-0.63");
        assert_eq!(fixed2(&Rational::from(42)), "42.00");
        assert_eq!(fixed2(&Rational::new(1, 200)), "0.01");
    }
}
