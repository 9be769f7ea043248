//! The `d = 6` dimension table, checked row by row.

use mubcert::symchar::kostka_count;
use mubcert::zeroweight::{dim_invariant, dims_table, kostka_bound, pattern_violations, zero_weight_dimension, Weight};
use num_bigint::BigInt;

/// Every row with non-zero dimension and `|w| ≤ 10`, as a reference list.
const TABLE: &[([i64; 6], u64)] = &[
    ([0, 0, 0, 0, 0, 0], 1),
    ([2, 0, 0, 0, 0, -2], 1),
    ([3, 0, 0, 0, 0, -3], 1),
    ([2, 2, 0, 0, -2, -2], 1),
    ([2, 2, 0, 0, 0, -4], 1),
    ([3, 1, 0, 0, -1, -3], 1),
    ([4, 0, 0, 0, -2, -2], 1),
    ([4, 0, 0, 0, 0, -4], 2),
    ([3, 2, 0, 0, -2, -3], 1),
    ([3, 2, 0, 0, -1, -4], 1),
    ([3, 2, 0, 0, 0, -5], 1),
    ([4, 1, 0, 0, -2, -3], 1),
    ([4, 1, 0, 0, -1, -4], 1),
    ([4, 1, 0, 0, 0, -5], 1),
    ([5, 0, 0, 0, -2, -3], 1),
    ([5, 0, 0, 0, -1, -4], 1),
    ([5, 0, 0, 0, 0, -5], 2),
];

fn expected(max: i64) -> Vec<(Vec<i64>, u64)> {
    let mut v: Vec<_> = TABLE
        .iter()
        .filter(|(w, _)| w.iter().map(|x| x.abs()).sum::<i64>() <= max)
        .map(|(w, d)| (w.to_vec(), *d))
        .collect();
    v.sort();
    v
}

fn computed(max: i64) -> Vec<(Vec<i64>, u64)> {
    let mut v: Vec<_> = dims_table(6, max)
        .unwrap()
        .into_iter()
        .filter(|r| r.dim > 0)
        .map(|r| (r.w.as_slice().to_vec(), r.dim))
        .collect();
    v.sort();
    v
}

#[test]
fn rows_up_to_eight() {
    let got = computed(8);
    assert_eq!(got, expected(8));
    assert!(got.iter().all(|(w, _)| w.iter().map(|x| x.abs()).sum::<i64>() != 2));
}

#[test]
fn rows_up_to_ten() {
    let got = computed(10);
    assert_eq!(got.len(), 17);
    assert_eq!(got, expected(10));
}

#[test]
fn nonzero_rows_follow_two_by_two_pattern() {
    assert!(pattern_violations(&dims_table(6, 10).unwrap()).is_empty());
}

#[test]
fn dimensions_bounded_by_kostka_numbers() {
    for (w, dim) in TABLE {
        let w = Weight::new(w.to_vec()).unwrap();
        let chi0_id = zero_weight_dimension(6, &w).unwrap();
        assert_eq!(chi0_id, kostka_count(&w.f(), &[w.s(); 6]), "{:?}", w.as_slice());
        assert_eq!(chi0_id, kostka_bound(6, &w));
        assert!(BigInt::from(*dim) <= chi0_id);
        assert_eq!(dim_invariant(6, &w).unwrap(), *dim);
    }
}

#[test]
fn dual_weights_have_equal_dimension() {
    for r in dims_table(6, 8).unwrap() {
        assert_eq!(dim_invariant(6, &r.w.dual()).unwrap(), r.dim, "{:?}", r.w.as_slice());
    }
}
