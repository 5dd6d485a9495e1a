//! Independent LTI oracle: Gauss-Jordan elimination over `BigRational`
//! and observability/controllability matrices built from explicit powers,
//! sharing no code with the library's fraction-free rank.

use hsj_core::lti::{LtiSystem, RationalMatrix};
use hsj_core::Rational;
use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub fn oracle_rank(m: &RationalMatrix) -> usize {
    let mut rows: Vec<Vec<BigRational>> = (0..m.rows())
        .map(|r| m.row(r).iter().map(|x| x.inner().clone()).collect())
        .collect();
    let mut rank = 0;
    for c in 0..m.cols() {
        let Some(p) = (rank..rows.len()).find(|r| !rows[*r][c].is_zero()) else { continue };
        rows.swap(rank, p);
        let pivot = rows[rank][c].clone();
        for x in rows[rank].iter_mut() {
            *x = &*x / &pivot;
        }
        let pivot_row = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && !row[c].is_zero() {
                let f = row[c].clone();
                for (x, p) in row.iter_mut().zip(&pivot_row) {
                    *x -= p * &f;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Oracle matrices built by explicit powers of A.
pub fn oracle_power(a: &RationalMatrix, k: usize) -> RationalMatrix {
    (0..k).fold(RationalMatrix::identity(a.rows()), |acc, _| acc.mul(a).unwrap())
}

pub fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = RationalMatrix> {
    // small entries with a bias towards zero so rank deficiency is common
    let entry = prop_oneof![
        3 => Just(Rational::zero()),
        5 => (-3i64..=3, 1i64..=3).prop_map(|(n, d)| Rational::new(n, d)),
    ];
    proptest::collection::vec(entry, rows * cols).prop_map(move |e| RationalMatrix::new(rows, cols, e).unwrap())
}

pub fn system() -> impl Strategy<Value = LtiSystem> {
    (1usize..=5, 1usize..=3, 1usize..=3).prop_flat_map(|(n, p, m)| {
        (matrix(n, n), matrix(p, n), matrix(n, m))
            .prop_map(|(a, c, b)| LtiSystem::new(a, c, Some(b)).unwrap())
    })
}

/// Matrices, ranks and verdicts of `sys` agree with the oracle, and the
/// delayed-output construction yields the same observability matrix.
pub fn check_system(sys: &LtiSystem) -> Result<(), TestCaseError> {
    let n = sys.n();
    let obs: Vec<RationalMatrix> = (0..n).map(|k| sys.c.mul(&oracle_power(&sys.a, k)).unwrap()).collect();
    let obs = RationalMatrix::vstack(&obs);
    let b = sys.b.clone().unwrap();
    let ctrl: Vec<RationalMatrix> = (0..n).map(|k| oracle_power(&sys.a, k).mul(&b).unwrap()).collect();
    let ctrl = RationalMatrix::hstack(&ctrl);

    prop_assert_eq!(&sys.observability_matrix(), &obs);
    prop_assert_eq!(&sys.controllability_matrix().unwrap(), &ctrl);
    prop_assert_eq!(sys.observability_matrix().rank(), oracle_rank(&obs));
    prop_assert_eq!(sys.is_observable(), oracle_rank(&obs) == n);
    prop_assert_eq!(sys.is_controllable().unwrap(), oracle_rank(&ctrl) == n);
    prop_assert_eq!(sys.delayed_output_observability(), sys.observability_matrix());
    Ok(())
}
