//! Cross-checks between independent computations, run by `oracle-suite`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use mubcert::certify::{
    common_factor, cyclo_mod_p, dense_certificate_check, dense_fourier_form, dense_unitary_form, first_nonvanishing,
    fourier_form, fourier_form_minors_mod_p, identity_form, root_primes, unitary_form,
};
use mubcert::hadamard::{
    fourier, fourier_det_closed_form, fourier_det_numeric, haar_unitary, is_hadamard, mub_construction, mub_defect,
    UnitaryMatrixF,
};
use mubcert::smatrix::{enumerate_classes, f_value, f_value_float_direct, FTable};
use mubcert::symchar::partitions_with_at_most;
use mubcert::tableaux::{projected_vector, ssyt_enumerate};
use mubcert::zeroweight::{dim_invariant, dim_oracle_projection, enumerate_candidate_weights, Weight};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        pass,
        detail,
    }
}

pub fn run_all(quick: bool, seed: u64) -> Vec<Check> {
    vec![
        dims(quick),
        sign_convention(seed),
        minor_route(quick),
        determinants(),
        exact_vs_float(seed),
        small_certificates(quick),
        mubs(),
    ]
}

fn dims(quick: bool) -> Check {
    let max = if quick { 4 } else { 6 };
    let mut tested = 0;
    let mut bad = Vec::new();
    for d in 2..=4 {
        for w in enumerate_candidate_weights(d, max) {
            tested += 1;
            match (dim_invariant(d, &w), dim_oracle_projection(d, &w)) {
                (Ok(a), Ok(b)) if a == b => {}
                (a, b) => bad.push(format!("d={d} w={:?}: {a:?} vs {b:?}", w.as_slice())),
            }
        }
    }
    check(
        "dim_invariant = projection rank",
        bad.is_empty(),
        format!("{tested} weights, d ∈ 2..=4, |w| ≤ {max}; mismatches: {bad:?}"),
    )
}

fn fourier_unnormalized(d: usize) -> Vec<Complex64> {
    let f = fourier(d).to_unitary();
    f.entries().iter().map(|z| z * (d as f64).sqrt()).collect()
}

fn sign_convention(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    let mut exact_ok = true;
    for (d, s) in [(3usize, 1u32), (4, 1), (3, 2)] {
        let mut table = FTable::new(d, s);
        let mut mats = vec![fourier_unnormalized(d)];
        for _ in 0..5 {
            mats.push(haar_unitary(d, &mut rng).entries().to_vec());
        }
        for shape in partitions_with_at_most(d as u32 * s, d) {
            for t in ssyt_enumerate(&shape, Some(&vec![s; d]), d as u8) {
                let v = projected_vector(&t, d, s).expect("content matches");
                let k = common_factor(&t);
                let (a_h, _) = fourier_form(d, s, &t, &mut table).expect("small case");
                exact_ok &= dense_fourier_form(&v) == a_h.scale(&k);
                exact_ok &= v.norm_sq() == &k * identity_form(d, s, &t);
                let kf = k.to_string().parse::<f64>().unwrap_or(f64::NAN);
                for m in &mats {
                    let dense = dense_unitary_form(&v, m);
                    let red = unitary_form(d, s, &t, m).expect("small case") * kf;
                    worst = worst.max((dense - red).norm() / (1.0 + dense.norm()));
                    cases += 1;
                }
            }
        }
    }
    check(
        "reduced forms = dense tensor forms",
        exact_ok && worst <= 1e-9,
        format!("{cases} (tableau, matrix) cases; Fourier exact: {exact_ok}; worst relative float gap {worst:.2e}"),
    )
}

fn minor_route(quick: bool) -> Check {
    let rp = root_primes(6, 2);
    let mut lines = Vec::new();
    let mut ok = true;
    let weights: &[(&[i64], bool)] = if quick {
        &[(&[2, 0, 0, 0, 0, -2], false)]
    } else {
        &[(&[2, 0, 0, 0, 0, -2], false), (&[3, 0, 0, 0, 0, -3], true)]
    };
    for &(w, orbits) in weights {
        let w = Weight::new(w.to_vec()).expect("valid weight");
        let Ok(Some((t, _))) = first_nonvanishing(6, &w) else {
            return check(
                "S-matrix route = minor route",
                false,
                format!("no tableau for {:?}", w.as_slice()),
            );
        };
        let mut table = FTable::new(6, w.s());
        let (a_h, _) = fourier_form(6, w.s(), &t, &mut table).expect("d = 6");
        for r in &rp {
            for j in [1u64, 5] {
                let got = fourier_form_minors_mod_p(6, w.s(), &t, r, j, orbits).expect("d = 6");
                ok &= got == cyclo_mod_p(&a_h, r, j);
            }
        }
        lines.push(format!("{:?}", w.as_slice()));
    }
    check(
        "S-matrix route = minor route (mod p)",
        ok,
        format!("d = 6, weights {}, 2 primes, both embeddings", lines.join(" ")),
    )
}

fn determinants() -> Check {
    let worst = (2..=12)
        .map(|d| (fourier_det_numeric(d) - fourier_det_closed_form(d)).norm())
        .fold(0.0, f64::max);
    let exact = fourier(6).det_unnormalized() == mubcert::cyclotomic::CycloInt::from_int(6, 216).expect("order 6");
    check(
        "det(F_d) closed form",
        worst <= 1e-9 && exact,
        format!("2 ≤ d ≤ 12 worst gap {worst:.2e}; det(F_6) = 1 exactly: {exact}"),
    )
}

fn exact_vs_float(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let two = enumerate_classes(6, 2, false).expect("s = 2");
    let three = enumerate_classes(6, 3, false).expect("s = 3");
    let mut keys: Vec<_> = two.iter().map(|e| e.key.clone()).collect();
    for _ in 0..100 {
        keys.push(three[rng.random_range(0..three.len())].key.clone());
    }
    for k in &keys {
        worst = worst.max((f_value(k).embed_float() - f_value_float_direct(k)).norm());
    }
    check(
        "F exact = F float",
        worst <= 1e-6,
        format!(
            "{} s = 2 classes, 100 random s = 3 classes; worst gap {worst:.2e}",
            two.len()
        ),
    )
}

fn small_certificates(quick: bool) -> Check {
    let mut ok = true;
    let mut lines = Vec::new();
    let cases: &[(usize, i64)] = if quick { &[(2, 4), (3, 2)] } else { &[(2, 6), (3, 4)] };
    for &(d, k) in cases {
        let h: Vec<Complex64> = fourier(d).to_unitary().entries().to_vec();
        match dense_certificate_check(d, &h, k) {
            Ok(rows) => {
                let min = rows.iter().filter_map(|r| r.min_eig).fold(f64::INFINITY, f64::min);
                let bound = -1.0 / d as f64 - 1e-8;
                ok &= min >= bound;
                lines.push(format!("d={d} |w|≤{k}: min eig {min:.6}"));
            }
            Err(e) => {
                ok = false;
                lines.push(format!("d={d}: {e}"));
            }
        }
    }
    check("small-d dense certificate", ok, lines.join("; "))
}

fn mubs() -> Check {
    let mut ok = true;
    let mut lines = Vec::new();
    for d in 2..=5 {
        match mub_construction(d) {
            Ok(b) => {
                let defect = mub_defect(&b);
                let had = b.iter().enumerate().all(|(i, u)| {
                    b.iter()
                        .enumerate()
                        .all(|(j, v)| i == j || is_hadamard(&u.adjoint_mul(v), 1e-10))
                });
                ok &= defect <= 1e-12 && had && b.len() == d + 1;
                lines.push(format!("d={d}: defect {defect:.1e}"));
            }
            Err(e) => {
                ok = false;
                lines.push(format!("d={d}: {e}"));
            }
        }
    }
    ok &= !is_hadamard(&UnitaryMatrixF::identity(3), 1e-10);
    check("MUB constructions unbiased", ok, lines.join("; "))
}
