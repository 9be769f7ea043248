//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines are always printed.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use mubcert::certify::{
    common_factor, dense_certificate_check, tableau_form, verify_weight, FTables, FormValue, QuadKind, Status,
};
use mubcert::cyclotomic::CycloInt;
use mubcert::hadamard::{
    difference_classes, equivalent, fourier, fourier_det_closed_form, fourier_det_numeric, h0_eval, h0_haar_integral,
    haar_unitary, is_hadamard, mub_construction, mub_defect, tensor, HMatrix, UnitaryMatrixF,
};
use mubcert::smatrix::{enumerate_classes, f_value, f_value_float_direct, FTable};
use mubcert::symchar::{kostka_count, partitions_with_at_most};
use mubcert::tableaux::{projected_vector, ssyt_enumerate, SparseTensor};
use mubcert::zeroweight::{
    dim_invariant, dim_oracle_projection, enumerate_candidate_weights, zero_weight_dimension, Weight,
};
use num_bigint::BigInt;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

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

type Check = Result<String, String>;
type Criterion = fn() -> Check;
type Rows = Vec<(Vec<i64>, u64)>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn mubcert(args: &[&str]) -> (i32, Value, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_mubcert"))
        .args(args)
        .output()
        .expect("binary runs");
    let code = out.status.code().unwrap_or(-1);
    let json = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (code, json, String::from_utf8_lossy(&out.stderr).into_owned())
}

fn weight(w: &[i64]) -> Weight {
    Weight::new(w.to_vec()).expect("valid weight")
}

fn table_rows(max: i64) -> Rows {
    let mut v: Vec<_> = TABLE
        .iter()
        .filter(|(w, _)| w.iter().map(|x| x.abs()).sum::<i64>() <= max)
        .map(|(w, d)| (w.to_vec(), *d))
        .collect();
    v.sort();
    v
}

fn cli_dims(max: i64) -> Result<(Rows, Duration), String> {
    let start = Instant::now();
    let (code, json, err) = mubcert(&["dims", "--d", "6", "--max", &max.to_string()]);
    let elapsed = start.elapsed();
    ensure(code == 0, format!("dims exited {code}: {err}"))?;
    let mut rows: Rows = json["rows"]
        .as_array()
        .ok_or("no rows in dims output")?
        .iter()
        .map(|r| {
            let w = r["w"].as_array().unwrap().iter().map(|x| x.as_i64().unwrap()).collect();
            (w, r["dim"].as_u64().unwrap())
        })
        .filter(|(_, d)| *d > 0)
        .collect();
    rows.sort();
    Ok((rows, elapsed))
}

fn criterion_1() -> Check {
    let (eight, t8) = cli_dims(8)?;
    ensure(eight == table_rows(8), format!("|w| ≤ 8 rows differ: {eight:?}"))?;
    ensure(
        eight.iter().all(|(w, _)| w.iter().map(|x| x.abs()).sum::<i64>() != 2),
        "row with |w| = 2",
    )?;
    ensure(t8 < Duration::from_secs(600), format!("max 8 took {t8:?}"))?;
    let (ten, t10) = cli_dims(10)?;
    ensure(ten == table_rows(10), format!("|w| ≤ 10 rows differ: {ten:?}"))?;
    ensure(t10 < Duration::from_secs(7200), format!("max 10 took {t10:?}"))?;
    let twos: Vec<_> = ten.iter().filter(|(_, d)| *d == 2).map(|(w, _)| w.clone()).collect();
    ensure(
        twos == vec![vec![4, 0, 0, 0, 0, -4], vec![5, 0, 0, 0, 0, -5]],
        format!("dim-2 rows {twos:?}"),
    )?;
    Ok(format!(
        "{} rows for |w| ≤ 8 ({:.1?}), {} rows for |w| ≤ 10 ({:.1?})",
        eight.len(),
        t8,
        ten.len(),
        t10
    ))
}

fn criterion_2() -> Check {
    let start = Instant::now();
    let mut tables = FTables::new();
    let v = verify_weight(6, &weight(&[2, 0, 0, 0, 0, -2]), &mut tables).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(v.status == Status::Pass, format!("status {:?}", v.status))?;
    let (a_h, a_i) = (v.a_h.clone().ok_or("A_H not real")?, v.a_i.clone().ok_or("no A_I")?);
    let lhs = BigInt::from(6) * &a_h + BigInt::from(6).pow(6) * &a_i;
    ensure(lhs >= BigInt::from(0), format!("6·A_H + 6^6·A_I = {lhs}"))?;
    ensure(elapsed < Duration::from_secs(600), format!("took {elapsed:?}"))?;
    Ok(format!(
        "A_H = {a_h}, A_I = {a_i}, 6·A_H + 6^6·A_I = {lhs}, λ = {} ({elapsed:.1?})",
        v.lambda.map(|q| q.to_string()).unwrap_or_default()
    ))
}

fn criterion_3() -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cache = dir.path().to_str().unwrap().to_string();
    let mut counts = Vec::new();
    for s in 1..=3u32 {
        let direct = enumerate_classes(6, s, false).map_err(|e| e.to_string())?.len();
        let (code, json, err) = mubcert(&["--cache-dir", &cache, "fs-table", "--d", "6", "--s", &s.to_string()]);
        ensure(code == 0, format!("fs-table s = {s} exited {code}: {err}"))?;
        let n = json["canonical_classes"].as_u64().unwrap_or(0) as usize;
        ensure(n == direct, format!("s = {s}: cli {n} vs library {direct}"))?;
        counts.push(n);
    }
    ensure(counts == vec![1, 11, 7920], format!("class counts {counts:?}"))?;

    // resume from a truncated file with one corrupt record
    let path = dir.path().join("ftable-d6-s3.jsonl");
    let full = fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let lines: Vec<&str> = full.lines().collect();
    let mut partial = lines[..lines.len() / 2].join("\n");
    partial.push_str("\n{\"key\": [1, 2\n");
    fs::write(&path, &partial).map_err(|e| e.to_string())?;
    let (code, _, _) = mubcert(&["--cache-dir", &cache, "fs-table", "--d", "6", "--s", "3", "--resume"]);
    ensure(code == 2, format!("corrupt cache without --lax exited {code}"))?;
    let (code, json, err) = mubcert(&[
        "--cache-dir",
        &cache,
        "fs-table",
        "--d",
        "6",
        "--s",
        "3",
        "--resume",
        "--lax",
    ]);
    ensure(code == 0, format!("resume exited {code}: {err}"))?;
    let reused = json["reused"].as_u64().unwrap_or(0) as usize;
    ensure(
        reused == lines.len() / 2,
        format!("reused {reused} of {}", lines.len() / 2),
    )?;
    let rebuilt = fs::read_to_string(&path).map_err(|e| e.to_string())?;
    ensure(rebuilt == full, "resumed table differs from a fresh build")?;

    let (code, json, err) = mubcert(&["--cache-dir", &cache, "verify", "--d", "6", "--k", "6"]);
    ensure(code == 0, format!("verify exited {code}: {err}"))?;
    let conclusion = json["conclusion"].as_str().unwrap_or_default().to_string();
    ensure(conclusion == "B_{≤6}(6) = 7", format!("conclusion {conclusion:?}"))?;
    let after = fs::read_to_string(&path).map_err(|e| e.to_string())?;
    ensure(after == full, "verify changed the s = 3 table")?;
    let lambdas: Vec<String> = json["report"]["weights"]
        .as_array()
        .ok_or("no weights")?
        .iter()
        .filter(|v| v["status"] == "pass")
        .map(|v| {
            format!(
                "{}/{}",
                v["lambda"]["num"].as_str().unwrap_or("?"),
                v["lambda"]["den"].as_str().unwrap_or("?")
            )
        })
        .collect();
    Ok(format!(
        "classes 1/11/7920, resume reused {reused}, {conclusion}, λ = {} ({:.1?})",
        lambdas.join(", "),
        start.elapsed()
    ))
}

/// `vᵀ M^{⊗n} v` summed term by term, with the Fourier case kept as an
/// exponent histogram.
fn dense_fourier(v: &SparseTensor, d: usize) -> CycloInt {
    let mut hist = vec![BigInt::from(0); d];
    for (a, ca) in v.terms() {
        for (b, cb) in v.terms() {
            let e: usize = a.iter().zip(b).map(|(&x, &y)| x as usize * y as usize).sum();
            hist[e % d] += ca * cb;
        }
    }
    CycloInt::from_exponent_counts(d as u32, &hist).unwrap()
}

fn dense_float(v: &SparseTensor, d: usize, m: &[Complex64]) -> Complex64 {
    let terms: Vec<(&Vec<u8>, f64)> = v
        .terms()
        .iter()
        .map(|(k, c)| (k, c.to_string().parse::<f64>().unwrap()))
        .collect();
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, ca) in &terms {
        for (b, cb) in &terms {
            let p = a.iter().zip(*b).fold(Complex64::new(ca * cb, 0.0), |p, (&x, &y)| {
                p * m[x as usize * d + y as usize]
            });
            acc += p;
        }
    }
    acc
}

fn criterion_4() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut exact_cases, mut float_cases) = (0, 0);
    let mut worst: f64 = 0.0;
    for (d, s) in [(3usize, 1u32), (4, 1), (3, 2)] {
        let mut table = FTable::new(d, s);
        let unitaries: Vec<Vec<Complex64>> = (0..5).map(|_| haar_unitary(d, &mut rng).entries().to_vec()).collect();
        for shape in partitions_with_at_most(d as u32 * s, d) {
            for t in ssyt_enumerate(&shape, Some(&vec![s; d]), d as u8) {
                let v = projected_vector(&t, d, s).map_err(|e| e.to_string())?;
                let k = common_factor(&t);
                let FormValue::Exact(a) =
                    tableau_form(d, s, &t, &QuadKind::Fourier, &mut table).map_err(|e| e.to_string())?
                else {
                    return Err("Fourier form not exact".into());
                };
                ensure(
                    dense_fourier(&v, d) == a.scale(&k),
                    format!("Fourier mismatch d={d} s={s} T={:?}", t.rows()),
                )?;
                let FormValue::Exact(id) =
                    tableau_form(d, s, &t, &QuadKind::Identity, &mut table).map_err(|e| e.to_string())?
                else {
                    return Err("identity form not exact".into());
                };
                ensure(
                    v.norm_sq() == id.as_rational_integer().unwrap() * &k,
                    "identity mismatch",
                )?;
                exact_cases += 1;
                let kf = k.to_string().parse::<f64>().unwrap();
                for m in &unitaries {
                    let red = tableau_form(d, s, &t, &QuadKind::Unitary(m.clone()), &mut table)
                        .map_err(|e| e.to_string())?
                        .to_complex()
                        * kf;
                    let dense = dense_float(&v, d, m);
                    worst = worst.max((dense - red).norm() / (1.0 + dense.norm()));
                    float_cases += 1;
                }
            }
        }
    }
    ensure(worst <= 1e-9, format!("random-unitary gap {worst:.2e}"))?;
    Ok(format!(
        "{exact_cases} exact Fourier/identity cases, {float_cases} random-unitary cases, worst relative gap {worst:.1e}"
    ))
}

fn criterion_5() -> Check {
    let mut n = 0;
    for d in 2..=4 {
        for w in enumerate_candidate_weights(d, 6) {
            let a = dim_invariant(d, &w).map_err(|e| e.to_string())?;
            let b = dim_oracle_projection(d, &w).map_err(|e| e.to_string())?;
            ensure(a == b, format!("d={d} w={:?}: {a} vs {b}", w.as_slice()))?;
            n += 1;
        }
    }
    for (w, _) in TABLE {
        let w = weight(w);
        let kostka = kostka_count(&w.f(), &[w.s(); 6]);
        let chi0 = zero_weight_dimension(6, &w).map_err(|e| e.to_string())?;
        let dim = dim_invariant(6, &w).map_err(|e| e.to_string())?;
        ensure(
            chi0 == kostka,
            format!("χ_0(id) {chi0} vs Kostka {kostka} at {:?}", w.as_slice()),
        )?;
        ensure(
            BigInt::from(dim) <= kostka,
            format!("dim above Kostka at {:?}", w.as_slice()),
        )?;
    }
    Ok(format!(
        "{n} weights agree; χ_0(id) = Kostka on {} table weights",
        TABLE.len()
    ))
}

fn criterion_6() -> Check {
    let worst = (2..=12)
        .map(|d| (fourier_det_numeric(d) - fourier_det_closed_form(d)).norm())
        .fold(0.0, f64::max);
    ensure(worst <= 1e-9, format!("worst gap {worst:.2e}"))?;
    let det = fourier(6).det_unnormalized();
    ensure(
        det == CycloInt::from_int(6, 216).unwrap(),
        format!("det of unnormalized F_6 = {det}"),
    )?;
    Ok(format!("worst gap {worst:.1e}; det(F_6) = 216/6^3 = 1 exactly"))
}

fn criterion_7() -> Check {
    let start = Instant::now();
    let f6 = fourier(6);
    let t23 = tensor(&fourier(2), &fourier(3));
    let w = equivalent(&HMatrix::Butson(t23.clone()), &HMatrix::Butson(f6.clone())).ok_or("F_6 ≁ F_2⊗F_3")?;
    let img = w.apply_butson(&t23).ok_or("witness not exact")?;
    let l = img.k.max(f6.k);
    ensure(img.lift(l) == f6.lift(l), "witness does not reconstruct F_6")?;
    let t22 = tensor(&fourier(2), &fourier(2));
    ensure(
        equivalent(&HMatrix::Butson(fourier(4)), &HMatrix::Butson(t22)).is_none(),
        "F_4 ~ F_2⊗F_2 reported",
    )?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!(
        "F_6 ~ F_2⊗F_3 reconstructed exactly, F_4 ≁ F_2⊗F_2 ({elapsed:.1?})"
    ))
}

fn criterion_8() -> Check {
    let mut lines = Vec::new();
    for d in 2..=5 {
        let b = mub_construction(d).map_err(|e| e.to_string())?;
        ensure(b.len() == d + 1, format!("d={d}: {} bases", b.len()))?;
        let defect = mub_defect(&b);
        ensure(defect <= 1e-12, format!("d={d}: defect {defect:.2e}"))?;
        let want = if d == 4 {
            "F_2⊗F_2".to_string()
        } else {
            format!("F_{d}")
        };
        for c in difference_classes(&b) {
            ensure(c.hadamard, format!("d={d}: U_{}*U_{} not Hadamard", c.i, c.j))?;
            ensure(
                c.class.as_deref() == Some(want.as_str()),
                format!("d={d}: U_{}*U_{} class {:?}", c.i, c.j, c.class),
            )?;
        }
        lines.push(format!("d={d} ~{want}"));
    }
    Ok(lines.join(", "))
}

fn criterion_9() -> Check {
    let h_id = h0_eval(&UnitaryMatrixF::identity(6));
    let h_f = h0_eval(&fourier(6).to_unitary());
    ensure((h_id - 5.0).abs() <= 1e-12, format!("h0(I) = {h_id}"))?;
    ensure(h_f.abs() <= 1e-12, format!("h0(F_6) = {h_f}"))?;
    ensure(is_hadamard(&fourier(6).to_unitary(), 1e-12), "F_6 not Hadamard")?;
    let est = h0_haar_integral(6, 100_000, 1).map_err(|e| e.to_string())?;
    let gap = (est.mean - 5.0 / 7.0).abs();
    ensure(gap <= 3.0 * est.std_err, format!("mean {} ± {}", est.mean, est.std_err))?;
    Ok(format!(
        "h0(I) = {h_id}, h0(F_6) = {h_f:.1e}, MC mean {:.6} ± {:.6} vs 5/7 ({:.2} s.e.)",
        est.mean,
        est.std_err,
        gap / est.std_err
    ))
}

fn criterion_10() -> Check {
    let mut lines = Vec::new();
    for (d, k) in [(2usize, 6i64), (3, 4)] {
        let h: Vec<Complex64> = fourier(d).to_unitary().entries().to_vec();
        let rows = dense_certificate_check(d, &h, k).map_err(|e| e.to_string())?;
        let min = rows.iter().filter_map(|r| r.min_eig).fold(f64::INFINITY, f64::min);
        ensure(min >= -1.0 / d as f64 - 1e-8, format!("d={d}: min eig {min}"))?;
        lines.push(format!("d={d} |w|≤{k}: min eig {min:.6} over {} weights", rows.len()));
    }
    Ok(lines.join("; "))
}

fn criterion_11() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let two = enumerate_classes(6, 2, false).map_err(|e| e.to_string())?;
    let three = enumerate_classes(6, 3, false).map_err(|e| e.to_string())?;
    let mut keys: Vec<_> = two.iter().map(|e| e.key.clone()).collect();
    keys.extend((0..100).map(|_| three[rng.random_range(0..three.len())].key.clone()));
    let worst = keys
        .iter()
        .map(|k| (f_value(k).embed_float() - f_value_float_direct(k)).norm())
        .fold(0.0, f64::max);
    ensure(worst <= 1e-6, format!("worst gap {worst:.2e}"))?;
    Ok(format!("{} s=2 and 100 s=3 classes, worst gap {worst:.1e}", two.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 11] = [
        ("d = 6 dimension table", criterion_1),
        ("degree-4 verdict", criterion_2),
        ("degree-6 verdict", criterion_3),
        ("reduced = dense quadratic forms", criterion_4),
        ("dimension cross-oracle", criterion_5),
        ("Fourier determinant", criterion_6),
        ("Hadamard equivalence", criterion_7),
        ("MUB suite", criterion_8),
        ("Welch / h0 checks", criterion_9),
        ("small-d dense certificate", criterion_10),
        ("exact vs float F", criterion_11),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let label = format!("{}", i + 1);
        if filter.as_ref().is_some_and(|x| x != &label) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match result {
            Ok(detail) => println!("PASS criterion {label:>2} {name}: {detail} [{:.1?}]", start.elapsed()),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {label:>2} {name}: {detail} [{:.1?}]", start.elapsed());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
