//! Observability and controllability of discrete-time LTI plants
//! `x(k+1) = A x(k) + B u(k)`, `y(k) = C x(k)`, over exact rationals.
//!
//! Rank is computed with fraction-free (Bareiss) elimination on integer
//! rows, so verdicts involve no tolerance. The module only checks a
//! user-supplied discretisation at the chosen WCRT; building `A`, `B`,
//! `C` from a program is left to the user.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LtiError {
    #[error("{what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: String,
        found: String,
    },
    #[error("the system has no input matrix B")]
    NoInput,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Dense row-major matrix of rationals.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Rational>,
}

impl RationalMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Rational>) -> Result<Self, LtiError> {
        if entries.len() != rows * cols {
            return Err(LtiError::Dimension {
                what: "entry count",
                expected: (rows * cols).to_string(),
                found: entries.len().to_string(),
            });
        }
        Ok(RationalMatrix { rows, cols, entries })
    }

    /// Builds from integer rows; panics on ragged input.
    pub fn from_i64(rows: &[&[i64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged matrix");
        let entries = rows.iter().flat_map(|r| r.iter().map(|x| Rational::from(*x))).collect();
        RationalMatrix {
            rows: rows.len(),
            cols,
            entries,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        RationalMatrix {
            rows,
            cols,
            entries: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.entries[i * n + i] = Rational::one();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &Rational {
        &self.entries[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[Rational] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                entries.push(self.get(r, c).clone());
            }
        }
        RationalMatrix {
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }

    pub fn mul(&self, rhs: &RationalMatrix) -> Result<RationalMatrix, LtiError> {
        if self.cols != rhs.rows {
            return Err(LtiError::Dimension {
                what: "matrix product",
                expected: format!("{} rows on the right", self.cols),
                found: rhs.rows.to_string(),
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for j in 0..rhs.cols {
                out.entries[i * rhs.cols + j] = (0..self.cols).map(|k| self.get(i, k) * rhs.get(k, j)).sum();
            }
        }
        Ok(out)
    }

    /// Stacks `blocks` vertically; all must have the same width.
    pub fn vstack(blocks: &[RationalMatrix]) -> RationalMatrix {
        let cols = blocks.first().map_or(0, |b| b.cols);
        let mut entries = Vec::new();
        let mut rows = 0;
        for b in blocks {
            assert_eq!(b.cols, cols, "vstack width mismatch");
            entries.extend(b.entries.iter().cloned());
            rows += b.rows;
        }
        RationalMatrix { rows, cols, entries }
    }

    /// Places `blocks` side by side; all must have the same height.
    pub fn hstack(blocks: &[RationalMatrix]) -> RationalMatrix {
        let t: Vec<RationalMatrix> = blocks.iter().map(|b| b.transpose()).collect();
        Self::vstack(&t).transpose()
    }

    /// Exact rank by fraction-free elimination.
    pub fn rank(&self) -> usize {
        let mut m: Vec<Vec<BigInt>> = (0..self.rows).map(|r| integer_row(self.row(r))).collect();
        bareiss_rank(&mut m, self.cols)
    }
}

/// Scales a rational row by the lcm of its denominators.
fn integer_row(row: &[Rational]) -> Vec<BigInt> {
    let lcm = row.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    row.iter().map(|x| x.numer() * (&lcm / x.denom())).collect()
}

fn bareiss_rank(m: &mut [Vec<BigInt>], cols: usize) -> usize {
    let mut rank = 0;
    let mut prev = BigInt::one();
    for c in 0..cols {
        let Some(p) = (rank..m.len()).find(|r| !m[*r][c].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        for r in rank + 1..m.len() {
            for k in c + 1..cols {
                let v = &m[rank][c] * &m[r][k] - &m[r][c] * &m[rank][k];
                // exact by Sylvester's identity
                debug_assert!((&v % &prev).is_zero());
                m[r][k] = v / &prev;
            }
            m[r][c] = BigInt::zero();
        }
        prev = m[rank][c].clone();
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    rank
}

impl fmt::Debug for RationalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for RationalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for r in 0..self.rows {
            if r > 0 {
                write!(f, "; ")?;
            }
            let row: Vec<String> = self.row(r).iter().map(|x| x.to_string()).collect();
            write!(f, "{}", row.join(" "))?;
        }
        write!(f, "]")
    }
}

/// A discretised plant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LtiSystem {
    pub a: RationalMatrix,
    pub c: RationalMatrix,
    pub b: Option<RationalMatrix>,
}

impl LtiSystem {
    pub fn new(a: RationalMatrix, c: RationalMatrix, b: Option<RationalMatrix>) -> Result<Self, LtiError> {
        let n = a.rows;
        if a.cols != n {
            return Err(LtiError::Dimension {
                what: "A",
                expected: format!("{n}x{n}"),
                found: format!("{}x{}", a.rows, a.cols),
            });
        }
        if c.cols != n {
            return Err(LtiError::Dimension {
                what: "C",
                expected: format!("{n} columns"),
                found: c.cols.to_string(),
            });
        }
        if let Some(b) = &b {
            if b.rows != n {
                return Err(LtiError::Dimension {
                    what: "B",
                    expected: format!("{n} rows"),
                    found: b.rows.to_string(),
                });
            }
        }
        Ok(LtiSystem { a, c, b })
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.rows
    }

    /// Output dimension.
    pub fn p(&self) -> usize {
        self.c.rows
    }

    /// Parses the plain-text format:
    ///
    /// ```text
    /// # comment
    /// A 2 2
    /// 1 1
    /// 0 1
    /// C 1 2
    /// 1 0
    /// B 2 1      (optional)
    /// 0
    /// 1
    /// ```
    ///
    /// Entries are integers, `p/q` or decimals, separated by whitespace.
    pub fn parse(text: &str) -> Result<Self, LtiError> {
        let mut tokens: Vec<(usize, &str)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("");
            tokens.extend(line.split_whitespace().map(|t| (i + 1, t)));
        }
        let mut it = tokens.into_iter().peekable();
        let (mut a, mut b, mut c) = (None, None, None);
        while let Some((line, name)) = it.next() {
            let mut dim = || -> Result<usize, LtiError> {
                let (l, t) = it.next().ok_or(LtiError::Parse {
                    line,
                    msg: format!("missing dimensions for {name}"),
                })?;
                t.parse().map_err(|_| LtiError::Parse {
                    line: l,
                    msg: format!("bad dimension `{t}`"),
                })
            };
            let (rows, cols) = (dim()?, dim()?);
            let mut entries = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                let (l, t) = it.next().ok_or(LtiError::Parse {
                    line,
                    msg: format!("{name} needs {} entries", rows * cols),
                })?;
                entries.push(t.parse::<Rational>().map_err(|e| LtiError::Parse {
                    line: l,
                    msg: format!("`{t}`: {e}"),
                })?);
            }
            let m = RationalMatrix::new(rows, cols, entries)?;
            let slot = match name {
                "A" => &mut a,
                "B" => &mut b,
                "C" => &mut c,
                other => {
                    return Err(LtiError::Parse {
                        line,
                        msg: format!("expected A, B or C, found `{other}`"),
                    })
                }
            };
            if slot.replace(m).is_some() {
                return Err(LtiError::Parse {
                    line,
                    msg: format!("{name} given twice"),
                });
            }
        }
        let missing = |what: &str| LtiError::Parse {
            line: 0,
            msg: format!("matrix {what} is missing"),
        };
        LtiSystem::new(a.ok_or_else(|| missing("A"))?, c.ok_or_else(|| missing("C"))?, b)
    }

    /// `[C; CA; …; CA^(n-1)]`, of size `(p·n)×n`.
    pub fn observability_matrix(&self) -> RationalMatrix {
        let mut blocks = vec![self.c.clone()];
        for _ in 1..self.n() {
            let next = blocks.last().expect("non-empty").mul(&self.a).expect("checked dimensions");
            blocks.push(next);
        }
        RationalMatrix::vstack(&blocks)
    }

    /// Observability matrix from the delayed-output form
    /// `y(k+1) = C x(k)`: the outputs `y(1), …, y(n)` as linear maps of
    /// the initial state, built from the state-transition matrices.
    pub fn delayed_output_observability(&self) -> RationalMatrix {
        let mut phi = RationalMatrix::identity(self.n());
        let mut blocks = Vec::with_capacity(self.n());
        for _ in 0..self.n() {
            // y(k+1) = C x(k) = C Φ(k) x(0)
            blocks.push(self.c.mul(&phi).expect("checked dimensions"));
            phi = self.a.mul(&phi).expect("checked dimensions");
        }
        RationalMatrix::vstack(&blocks)
    }

    /// `[B, AB, …, A^(n-1)B]`, of size `n×(m·n)`.
    pub fn controllability_matrix(&self) -> Result<RationalMatrix, LtiError> {
        let b = self.b.as_ref().ok_or(LtiError::NoInput)?;
        let mut blocks = vec![b.clone()];
        for _ in 1..self.n() {
            let next = self.a.mul(blocks.last().expect("non-empty")).expect("checked dimensions");
            blocks.push(next);
        }
        Ok(RationalMatrix::hstack(&blocks))
    }

    pub fn is_observable(&self) -> bool {
        self.observability_matrix().rank() == self.n()
    }

    pub fn is_controllable(&self) -> Result<bool, LtiError> {
        Ok(self.controllability_matrix()?.rank() == self.n())
    }

    pub fn report(&self) -> LtiReport {
        let obs = self.observability_matrix();
        let ctrl = self.controllability_matrix().ok();
        LtiReport {
            n: self.n(),
            observability_rank: obs.rank(),
            observable: obs.rank() == self.n(),
            controllability_rank: ctrl.as_ref().map(RationalMatrix::rank),
            controllable: ctrl.map(|m| m.rank() == self.n()),
        }
    }
}

/// Ranks and verdicts for one system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LtiReport {
    pub n: usize,
    pub observability_rank: usize,
    pub observable: bool,
    pub controllability_rank: Option<usize>,
    pub controllable: Option<bool>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(a: &[&[i64]], c: &[&[i64]], b: Option<&[&[i64]]>) -> LtiSystem {
        LtiSystem::new(
            RationalMatrix::from_i64(a),
            RationalMatrix::from_i64(c),
            b.map(RationalMatrix::from_i64),
        )
        .unwrap()
    }

    #[test]
    fn ranks() {
        assert_eq!(RationalMatrix::zeros(3, 2).rank(), 0);
        assert_eq!(RationalMatrix::identity(3).rank(), 3);
        assert_eq!(RationalMatrix::from_i64(&[&[1, 2], &[2, 4]]).rank(), 1);
        let halves = RationalMatrix::new(
            2,
            2,
            vec![Rational::new(1, 2), Rational::new(1, 3), Rational::new(3, 2), Rational::one()],
        )
        .unwrap();
        assert_eq!(halves.rank(), 1);
    }

    #[test]
    fn observability_examples() {
        let s = sys(&[&[1, 0], &[0, 1]], &[&[1, 0]], None);
        assert_eq!(s.observability_matrix(), RationalMatrix::from_i64(&[&[1, 0], &[1, 0]]));
        assert!(!s.is_observable());
        let s = sys(&[&[1, 1], &[0, 1]], &[&[1, 0]], None);
        assert_eq!(s.observability_matrix(), RationalMatrix::from_i64(&[&[1, 0], &[1, 1]]));
        assert!(s.is_observable());
        assert!(sys(&[&[5]], &[&[3]], None).is_observable());
        assert_eq!(s.delayed_output_observability(), s.observability_matrix());
    }

    #[test]
    fn controllability_examples() {
        let s = sys(&[&[1, 0], &[0, 1]], &[&[1, 0]], Some(&[&[1], &[0]]));
        assert!(!s.is_controllable().unwrap());
        let s = sys(&[&[0, 1], &[0, 0]], &[&[1, 0]], Some(&[&[0], &[1]]));
        assert_eq!(s.controllability_matrix().unwrap(), RationalMatrix::from_i64(&[&[0, 1], &[1, 0]]));
        assert!(s.is_controllable().unwrap());
        assert!(sys(&[&[2]], &[&[1]], Some(&[&[7]])).is_controllable().unwrap());
        assert_eq!(sys(&[&[2]], &[&[1]], None).is_controllable(), Err(LtiError::NoInput));
    }

    #[test]
    fn parses_matrix_files() {
        let s = LtiSystem::parse("# plant\nA 2 2\n1 1/2\n0 1\nC 1 2\n1 0\nB 2 1\n0\n1\n").unwrap();
        assert_eq!(s.a.get(0, 1), &Rational::new(1, 2));
        assert_eq!(s.report().controllable, Some(true));
        assert!(matches!(LtiSystem::parse("A 2 2\n1 0 0\n"), Err(LtiError::Parse { .. })));
        assert!(matches!(LtiSystem::parse("A 1 1\n1\n"), Err(LtiError::Parse { .. })));
        assert!(matches!(
            LtiSystem::parse("A 2 2\n1 0 0 1\nC 1 3\n1 0 0\n"),
            Err(LtiError::Dimension { what: "C", .. })
        ));
    }
}
