use mubcert::certify::{
    cyclo_mod_p, dense_certificate_check, first_nonvanishing, fourier_form, fourier_form_minors_mod_p, identity_form,
    inequality_holds, root_primes, verify_weight, FTables, Status,
};
use mubcert::cyclotomic::CycloInt;
use mubcert::hadamard::fourier;
use mubcert::smatrix::{distinct_keys, enumerate_classes, FTable};
use mubcert::tableaux::{shape_of_weight, ssyt_enumerate};
use mubcert::zeroweight::{dim_invariant, dim_oracle_projection, enumerate_candidate_weights, Weight};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use proptest::prelude::*;

fn weight(v: &[i64]) -> Weight {
    Weight::new(v.to_vec()).unwrap()
}

#[test]
fn degree_four_weight_passes() {
    let mut tables = FTables::new();
    let v = verify_weight(6, &weight(&[2, 0, 0, 0, 0, -2]), &mut tables).unwrap();
    assert_eq!(v.status, Status::Pass);
    assert_eq!(v.dim, 1);
    let (a_h, a_i) = (v.a_h.clone().unwrap(), v.a_i.clone().unwrap());
    assert_eq!(a_h, BigInt::from(-3_762_339_840i64));
    assert_eq!(a_i, BigInt::from(483_840));
    assert_eq!(v.lambda.unwrap(), BigRational::new((-1).into(), 6.into()));
    assert!(BigInt::from(6) * &a_h + BigInt::from(6).pow(6) * &a_i >= BigInt::from(0));
}

#[test]
fn trivial_weight_has_unit_lambda() {
    let mut tables = FTables::new();
    let v = verify_weight(6, &Weight::zero(6), &mut tables).unwrap();
    assert_eq!(v.status, Status::Pass);
    assert_eq!(v.a_h, v.a_i);
}

#[test]
fn unbalanced_and_empty_weights_auto_pass() {
    let mut tables = FTables::new();
    let v = verify_weight(6, &weight(&[1, 0, 0, 0, 0, 0]), &mut tables).unwrap();
    assert_eq!(v.status, Status::AutoPassZeroSum);
    let v = verify_weight(6, &weight(&[1, 0, 0, 0, 0, -1]), &mut tables).unwrap();
    assert_eq!(v.status, Status::AutoPassDimZero);
}

#[test]
fn dimension_two_weight_is_out_of_scope() {
    let mut tables = FTables::new();
    let v = verify_weight(6, &weight(&[4, 0, 0, 0, 0, -4]), &mut tables).unwrap();
    assert_eq!(v.status, Status::OutOfScope);
    assert!(!v.status.is_pass());
}

#[test]
fn minor_route_agrees_at_degree_four() {
    let w = weight(&[2, 0, 0, 0, 0, -2]);
    let (t, _) = first_nonvanishing(6, &w).unwrap().unwrap();
    let mut table = FTable::new(6, 2);
    let (a, _) = fourier_form(6, 2, &t, &mut table).unwrap();
    for rp in root_primes(6, 2) {
        for j in [1, 5] {
            assert_eq!(
                fourier_form_minors_mod_p(6, 2, &t, &rp, j, false).unwrap(),
                cyclo_mod_p(&a, &rp, j)
            );
        }
    }
}

#[test]
fn lambda_independent_of_tableau_choice() {
    let mut checked = 0;
    for d in 2..=4usize {
        for w in enumerate_candidate_weights(d, 6) {
            if dim_invariant(d, &w).unwrap() != 1 {
                continue;
            }
            let (s, f) = shape_of_weight(w.as_slice()).unwrap();
            let mut table = FTable::new(d, s);
            let forms: Vec<(CycloInt, BigInt)> = ssyt_enumerate(&f, Some(&vec![s; d]), d as u8)
                .into_iter()
                .map(|t| (identity_form(d, s, &t), t))
                .filter(|(a_i, _)| *a_i != BigInt::from(0))
                .map(|(a_i, t)| (fourier_form(d, s, &t, &mut table).unwrap().0, a_i))
                .collect();
            let (h0, i0) = &forms[0];
            for (h, i) in &forms[1..] {
                assert_eq!(h.scale(i0), h0.scale(i), "d = {d}, w = {:?}", w.as_slice());
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn class_counts_for_small_s() {
    assert_eq!(enumerate_classes(6, 1, false).unwrap().len(), 1);
    let two = enumerate_classes(6, 2, false).unwrap();
    assert_eq!(two.len(), 11);
    assert_eq!(distinct_keys(&two).len(), 11);
}

#[test]
fn projection_oracle_matches_characters() {
    for d in 2..=4 {
        for w in enumerate_candidate_weights(d, 6) {
            assert_eq!(
                dim_invariant(d, &w).unwrap(),
                dim_oracle_projection(d, &w).unwrap(),
                "{:?}",
                w.as_slice()
            );
        }
    }
}

#[test]
fn small_dense_certificates() {
    for (d, k) in [(2usize, 6i64), (3, 4)] {
        let h: Vec<Complex64> = fourier(d).to_unitary().entries().to_vec();
        let rows = dense_certificate_check(d, &h, k).unwrap();
        let min = rows.iter().filter_map(|r| r.min_eig).fold(f64::INFINITY, f64::min);
        assert!(min >= -1.0 / d as f64 - 1e-8, "d = {d}: {min}");
    }
}

proptest! {
    #[test]
    fn inequality_matches_rational_comparison(
        a_h in -10_000_000i64..10_000_000,
        a_i in 1i64..100_000,
        d in 2usize..=7,
        n in 0u32..=8,
    ) {
        let (h, i) = (BigInt::from(a_h), BigInt::from(a_i));
        let got = inequality_holds(d, n, &h, &i);
        let lambda_bound = if n % 2 == 0 {
            let lhs = BigRational::new(h.clone(), BigInt::from(d).pow(n / 2) * &i);
            lhs >= BigRational::new((-1).into(), BigInt::from(d))
        } else {
            a_h >= 0 || BigInt::from(d * d) * &h * &h <= BigInt::from(d).pow(n) * &i * &i
        };
        prop_assert_eq!(got, lambda_bound);
    }
}
