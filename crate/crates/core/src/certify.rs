//! Reduced quadratic forms on the invariant vector, the exact per-weight
//! inequality, degree-level reports, and dense oracles for small `d`.
//!
//! For a filling `T` of shape `f` and content `(s,…,s)`, let
//! `v = Σ_ρ sgn(ρ)^s ρ^{⊗n} Y_f e_T` (the signed `S_d` projection scaled by `d!`).
//! For any `d×d` matrix `M`,
//!
//! `vᵀ M^{⊗n} v = |C|·|R_stab|² · Σ_{σ,σ'∈R₂} Σ_{τ∈C} sgn(τ) G_M(τσ(T), σ'(T))`
//!
//! with `G_M(A,B) = Σ_{ρ,ρ'} sgn(ρρ')^s Π_t M_{ρ(a_t), ρ'(b_t)}`. The double sum
//! is the reduced form `A_M`. For the unnormalized Fourier matrix `(ζ^{jk})`
//! one has `G = F(S(A,B))`, and for the identity `G = d!·Σ_π sgn(π)^s [π(A)=B]`.
//! The sign `sgn(ρρ')^s` sits inside `G`; the dense oracles below pin this
//! convention down.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::Serialize;
use thiserror::Error;

use crate::cyclotomic::CycloInt;
use crate::hadamard::fourier_det_exponent;
use crate::perm::all_perms;
use crate::smatrix::{reduce_counts_into, FTable};
use crate::symchar::factorial;
use crate::tableaux::{
    balanced_tuple_count, default_tableau_and_groups, projected_vector, shape_of_weight, ssyt_enumerate, SparseTensor,
    Tableau, TableauError,
};
use crate::zeroweight::{all_weights_up_to, dim_invariant, enumerate_candidate_weights, Weight, ZwError};

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("reduced forms need dim Ṽ_w = 1, found {0}")]
    DimNotOne(u64),
    #[error("weight {w} has dim Ṽ_w = {dim}; matrix-valued coefficients are not implemented")]
    OutOfScope { w: Weight, dim: u64 },
    #[error("dim Ṽ_w = 1 for {0} but no tableau gives a non-zero projection")]
    NoTableau(Weight),
    #[error("A_H for {0} is not a rational integer")]
    NotReal(Weight),
    #[error("packed S-matrices need {0} bits, more than 128")]
    PackingTooWide(usize),
    #[error("dense computation exceeds the size limit ({0} coordinates)")]
    TooLarge(BigInt),
    #[error("matrix must be {d}×{d}")]
    BadMatrix { d: usize },
    #[error(transparent)]
    Zw(#[from] ZwError),
    #[error(transparent)]
    Tableau(#[from] TableauError),
}

/// Which matrix `M` the quadratic form uses.
#[derive(Debug, Clone)]
pub enum QuadKind {
    /// `M = I`; gives `‖v‖²` up to the common factor.
    Identity,
    /// `M = (ζ_d^{jk})`, the Fourier matrix without its `1/√d`.
    Fourier,
    /// An arbitrary `d×d` complex matrix, row-major.
    Unitary(Vec<Complex64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FormValue {
    Exact(CycloInt),
    Float(Complex64),
}

impl FormValue {
    pub fn to_complex(&self) -> Complex64 {
        match self {
            FormValue::Exact(c) => c.embed_float(),
            FormValue::Float(z) => *z,
        }
    }
}

/// Counters from one reduced Fourier evaluation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FormStats {
    pub pairs: usize,
    pub orbits: usize,
    pub distinct_s: usize,
    pub distinct_keys: usize,
}

struct PairData {
    d: usize,
    bits: usize,
    /// Columns of each `σ(T)`, `σ ∈ R₂`, with symbols shifted to `0..d`.
    cols: Vec<Vec<Vec<u8>>>,
    perms_by_len: Vec<Vec<(Vec<u8>, i8)>>,
}

impl PairData {
    fn new(d: usize, s: u32, t: &Tableau) -> Result<Self, CertifyError> {
        let groups = default_tableau_and_groups(&t.shape(), t)?;
        let bits = (u32::BITS - s.leading_zeros()).max(1) as usize;
        if d * d * bits > 128 {
            return Err(CertifyError::PackingTooWide(d * d * bits));
        }
        let cols: Vec<Vec<Vec<u8>>> = groups
            .r2
            .iter()
            .map(|x| {
                x.columns()
                    .into_iter()
                    .map(|c| c.into_iter().map(|v| v - 1).collect())
                    .collect()
            })
            .collect();
        let max_len = cols.iter().flat_map(|c| c.iter().map(Vec::len)).max().unwrap_or(0);
        let perms_by_len = (0..=max_len).map(all_perms).collect();
        Ok(PairData {
            d,
            bits,
            cols,
            perms_by_len,
        })
    }

    fn unit(&self, m: u8, n: u8) -> u128 {
        1u128 << ((m as usize * self.d + n as usize) * self.bits)
    }

    fn decode(&self, key: u128) -> Vec<u8> {
        let mut out = vec![0u8; self.d * self.d];
        self.decode_into(key, &mut out);
        out
    }

    fn decode_into(&self, mut key: u128, out: &mut [u8]) {
        let mask = (1u128 << self.bits) - 1;
        for slot in out.iter_mut() {
            *slot = (key & mask) as u8;
            key >>= self.bits;
        }
    }

    /// Signed multiplicities of the count matrices `S(τσ(T), σ'(T))` over `τ ∈ C`.
    fn histogram(&self, i: usize, j: usize, out: &mut FxHashMap<u128, i64>) {
        let a = &self.cols[i];
        let b = &self.cols[j];
        let mut base = 0u128;
        let mut lists: Vec<Vec<(u128, i64)>> = Vec::new();
        for (ca, cb) in a.iter().zip(b) {
            if ca.len() == 1 {
                base += self.unit(ca[0], cb[0]);
                continue;
            }
            let list = self.perms_by_len[ca.len()]
                .iter()
                .map(|(p, sg)| {
                    let inc = (0..ca.len()).map(|r| self.unit(ca[p[r] as usize], cb[r])).sum::<u128>();
                    (inc, *sg as i64)
                })
                .collect();
            lists.push(list);
        }
        fn rec(lists: &[Vec<(u128, i64)>], acc: u128, sign: i64, out: &mut FxHashMap<u128, i64>) {
            match lists {
                [] => *out.entry(acc).or_default() += sign,
                [last] => {
                    for &(inc, sg) in last {
                        *out.entry(acc + inc).or_default() += sign * sg;
                    }
                }
                [first, rest @ ..] => {
                    for &(inc, sg) in first {
                        rec(rest, acc + inc, sign * sg, out);
                    }
                }
            }
        }
        rec(&lists, base, 1, out);
    }

    fn pairs(&self) -> Vec<(usize, usize)> {
        let k = self.cols.len();
        (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).collect()
    }

    /// Orbit representatives of pairs `(σ(T), σ'(T))` with orbit sizes. The
    /// pair term is unchanged by a common symbol relabelling, by a common
    /// swap of two equal-length columns, and (for symmetric `M`) by swapping
    /// the two fillings.
    fn pair_orbits(&self, symmetric: bool) -> Vec<((usize, usize), u64)> {
        let k = self.cols.len();
        let index: FxHashMap<&Vec<Vec<u8>>, usize> = self.cols.iter().enumerate().map(|(i, c)| (c, i)).collect();
        let mut gens: Vec<Vec<usize>> = Vec::new();
        for (rho, _) in all_perms(self.d).into_iter().skip(1) {
            let image: Option<Vec<usize>> = self
                .cols
                .iter()
                .map(|f| {
                    let g: Vec<Vec<u8>> = f.iter().map(|c| c.iter().map(|&x| rho[x as usize]).collect()).collect();
                    index.get(&g).copied()
                })
                .collect();
            if let Some(img) = image {
                gens.push(img);
            }
        }
        let ncols = self.cols.first().map_or(0, Vec::len);
        for c in 0..ncols.saturating_sub(1) {
            if self.cols[0][c].len() != self.cols[0][c + 1].len() {
                continue;
            }
            let image: Option<Vec<usize>> = self
                .cols
                .iter()
                .map(|f| {
                    let mut g = f.clone();
                    g.swap(c, c + 1);
                    index.get(&g).copied()
                })
                .collect();
            if let Some(img) = image {
                gens.push(img);
            }
        }
        let mut parent: Vec<usize> = (0..k * k).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let union = |parent: &mut Vec<usize>, a: usize, b: usize| {
            let (ra, rb) = (find(parent, a), find(parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        };
        for i in 0..k {
            for j in 0..k {
                for g in &gens {
                    union(&mut parent, i * k + j, g[i] * k + g[j]);
                }
                if symmetric {
                    union(&mut parent, i * k + j, j * k + i);
                }
            }
        }
        let mut sizes: BTreeMap<usize, u64> = BTreeMap::new();
        for x in 0..k * k {
            *sizes.entry(find(&mut parent, x)).or_default() += 1;
        }
        sizes.into_iter().map(|(r, n)| ((r / k, r % k), n)).collect()
    }
}

/// Signed multiplicities of reduced keys, packed into a `u128` when they fit.
enum KeyAcc {
    Packed {
        d: usize,
        bits: usize,
        map: FxHashMap<u128, i128>,
    },
    Plain(FxHashMap<Vec<u8>, i128>),
}

impl KeyAcc {
    fn new(packable: bool, d: usize, bits: usize) -> Self {
        if packable {
            KeyAcc::Packed {
                d,
                bits,
                map: FxHashMap::default(),
            }
        } else {
            KeyAcc::Plain(FxHashMap::default())
        }
    }

    fn add(&mut self, key: &[u8], m: i128) {
        match self {
            KeyAcc::Packed { bits, map, .. } => {
                let packed = key.iter().rev().fold(0u128, |acc, &x| (acc << *bits) | x as u128);
                *map.entry(packed).or_default() += m;
            }
            KeyAcc::Plain(map) => *map.entry(key.to_vec()).or_default() += m,
        }
    }

    fn merge(&mut self, other: KeyAcc) {
        for (k, m) in other.into_vec() {
            self.add(&k, m);
        }
    }

    fn into_vec(self) -> Vec<(Vec<u8>, i128)> {
        match self {
            KeyAcc::Packed { d, bits, map } => {
                let mask = (1u128 << bits) - 1;
                map.into_iter()
                    .map(|(mut p, m)| {
                        let mut k = vec![0u8; d * d];
                        for slot in k.iter_mut() {
                            *slot = (p & mask) as u8;
                            p >>= bits;
                        }
                        (k, m)
                    })
                    .collect()
            }
            KeyAcc::Plain(map) => map.into_iter().collect(),
        }
    }
}

/// Sign of the permutation carrying column `a` onto `b` (same distinct
/// symbols), or 0 if they differ as sets.
fn column_sign(a: &[u8], b: &[u8]) -> i64 {
    let mut pos = [u8::MAX; 32];
    for (k, &x) in a.iter().enumerate() {
        pos[x as usize] = k as u8;
    }
    let mut idx = [0u8; 32];
    for (r, &y) in b.iter().enumerate() {
        let p = pos[y as usize];
        if p == u8::MAX {
            return 0;
        }
        idx[r] = p;
    }
    crate::perm::sign(&idx[..b.len()]) as i64
}

/// `A_I = d!·Σ_{σ,σ'∈R₂} Σ_{τ∈C} sgn(τ) Σ_{π∈S_d} sgn(π)^s [π(τσ(T)) = σ'(T)]`.
pub fn identity_form(d: usize, s: u32, t: &Tableau) -> BigInt {
    let data = PairData::new(d, s, t).expect("identity form needs no packing");
    let perms = all_perms(d);
    let total: i128 = data
        .pairs()
        .par_iter()
        .map(|&(i, j)| {
            let a = &data.cols[i];
            let b = &data.cols[j];
            let mut acc = 0i128;
            let mut mapped = vec![0u8; d];
            'perm: for (pi, sg) in &perms {
                let mut sign = if s % 2 == 1 { *sg as i64 } else { 1 };
                for (ca, cb) in a.iter().zip(b) {
                    mapped.clear();
                    mapped.extend(ca.iter().map(|&x| pi[x as usize]));
                    let c = column_sign(&mapped, cb);
                    if c == 0 {
                        continue 'perm;
                    }
                    sign *= c;
                }
                acc += sign as i128;
            }
            acc
        })
        .sum();
    BigInt::from(total) * factorial(d as u32)
}

/// The reduced Fourier form `A_H ∈ Z[ζ_d]`. Missing `F` values are computed
/// and stored in `table`.
pub fn fourier_form(d: usize, s: u32, t: &Tableau, table: &mut FTable) -> Result<(CycloInt, FormStats), CertifyError> {
    let data = PairData::new(d, s, t)?;
    let pairs = data.pair_orbits(true);
    let kbits = (usize::BITS - (d.max(2) - 1).leading_zeros()) as usize;
    let packable = d * d * kbits <= 128;
    let (key_mult, distinct_s) = pairs
        .par_iter()
        .fold(
            || (KeyAcc::new(packable, d, kbits), FxHashMap::default(), 0usize),
            |(mut acc, mut hist, mut seen), &((i, j), orbit)| {
                hist.clear();
                data.histogram(i, j, &mut hist);
                seen += hist.len();
                let mut counts = vec![0u8; d * d];
                let mut key = vec![0u8; d * d];
                for (&packed, &m) in &hist {
                    if m == 0 {
                        continue;
                    }
                    data.decode_into(packed, &mut counts);
                    let sg = reduce_counts_into(&counts, d, s, &mut key);
                    acc.add(&key, m as i128 * sg as i128 * orbit as i128);
                }
                (acc, hist, seen)
            },
        )
        .map(|(acc, _, seen)| (acc, seen))
        .reduce(
            || (KeyAcc::new(packable, d, kbits), 0),
            |(mut a, sa), (b, sb)| {
                a.merge(b);
                (a, sa + sb)
            },
        );
    let key_mult = key_mult.into_vec();
    let mut total = CycloInt::zero(d as u32).expect("d ≥ 1");
    let mut keys: Vec<_> = key_mult.into_iter().filter(|(_, m)| *m != 0).collect();
    keys.sort();
    // compute any missing values in parallel before the serial inner product
    let missing: Vec<Vec<u8>> = keys
        .iter()
        .filter(|(k, _)| !table.contains(k))
        .map(|(k, _)| k.clone())
        .collect();
    let computed: Vec<(Vec<u8>, CycloInt)> = missing
        .into_par_iter()
        .map(|k| {
            let m = crate::smatrix::SMatrix::new(d, s, k.clone()).expect("reduced keys are magic");
            let v = crate::smatrix::f_value(&m);
            (k, v)
        })
        .collect();
    for (k, v) in computed {
        table.insert(k, v);
    }
    for (k, m) in &keys {
        let f = table.get(k).expect("filled above");
        total = &total + &f.scale(&BigInt::from(*m));
    }
    Ok((
        total,
        FormStats {
            pairs: pairs.iter().map(|p| p.1 as usize).sum(),
            orbits: pairs.len(),
            distinct_s,
            distinct_keys: keys.len(),
        },
    ))
}

/// `G_M` evaluated on a count matrix.
fn g_matrix(d: usize, s: u32, counts: &[u8], m: &[Complex64], perms: &[(Vec<u8>, i8)]) -> Complex64 {
    let nz: Vec<(usize, usize, i32)> = (0..d)
        .flat_map(|r| (0..d).map(move |c| (r, c)))
        .filter(|&(r, c)| counts[r * d + c] > 0)
        .map(|(r, c)| (r, c, counts[r * d + c] as i32))
        .collect();
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, sx) in perms {
        for (y, sy) in perms {
            let mut prod = Complex64::new(1.0, 0.0);
            for &(r, c, k) in &nz {
                prod *= m[x[r] as usize * d + y[c] as usize].powi(k);
            }
            let sg = if s % 2 == 1 { (*sx * *sy) as f64 } else { 1.0 };
            acc += prod * sg;
        }
    }
    acc
}

/// A prime `p ≡ 1 (mod m)` with a primitive `m`-th root of unity in `F_p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RootPrime {
    pub p: u64,
    pub m: u64,
    pub root: u64,
}

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1 % p;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, p);
        }
        b = mul_mod(b, b, p);
        e >>= 1;
    }
    r
}

fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &q in &BASES {
        if n.is_multiple_of(q) {
            return n == q;
        }
    }
    let (mut dd, mut r) = (n - 1, 0);
    while dd % 2 == 0 {
        dd /= 2;
        r += 1;
    }
    'base: for &a in &BASES {
        let mut x = pow_mod(a, dd, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'base;
            }
        }
        return false;
    }
    true
}

/// The `count` largest primes below `2^61` that are `≡ 1 (mod m)`, each with
/// a primitive `m`-th root of unity.
pub fn root_primes(m: u64, count: usize) -> Vec<RootPrime> {
    let factors: Vec<u64> = (2..=m).filter(|&q| m.is_multiple_of(q) && is_prime_u64(q)).collect();
    let mut out = Vec::new();
    let mut p = ((1u64 << 61) - 1) / m * m + 1;
    while out.len() < count {
        p -= m;
        if !is_prime_u64(p) {
            continue;
        }
        let root = (2..)
            .map(|g| pow_mod(g, (p - 1) / m, p))
            .find(|&w| factors.iter().all(|&q| pow_mod(w, m / q, p) != 1))
            .expect("F_p* is cyclic");
        out.push(RootPrime { p, m, root });
    }
    out
}

/// Image of `x` under `ζ_order ↦ root^{(m/order)·j}` in `F_p`.
pub fn cyclo_mod_p(x: &CycloInt, rp: &RootPrime, j: u64) -> u64 {
    let order = x.order() as u64;
    assert_eq!(rp.m % order, 0, "root order must be a multiple of the cyclotomic order");
    let z = pow_mod(rp.root, rp.m / order * j, rp.p);
    let pb = BigInt::from(rp.p);
    let mut acc = 0u64;
    let mut zk = 1u64;
    for c in x.coeffs() {
        let c = c.mod_floor(&pb).to_u64().expect("reduced below p");
        acc = (acc + mul_mod(c, zk, rp.p)) % rp.p;
        zk = mul_mod(zk, z, rp.p);
    }
    acc
}

/// Independent route to the reduced Fourier form, evaluated in `F_p` at
/// `ζ_d ↦ root^{(m/d)·j}`. The column sum turns each column into a minor of
/// `(ζ^{jk})`, so `A = Σ_{σ,σ'} Σ_{x,y∈S_d} sgn(xy)^s Π_cols det[ζ^{x(a_i) y(b_k)}]`.
/// No S-matrices or f-values are involved. With `use_orbits` the pair sum
/// runs over orbit representatives.
pub fn fourier_form_minors_mod_p(
    d: usize,
    s: u32,
    t: &Tableau,
    rp: &RootPrime,
    j: u64,
    use_orbits: bool,
) -> Result<u64, CertifyError> {
    assert!(d <= 16, "masks are 16-bit");
    assert_eq!(rp.m % d as u64, 0, "root order must be a multiple of d");
    let p = rp.p;
    let w = pow_mod(rp.root, rp.m / d as u64 * j, p);
    let wp: Vec<u64> = (0..d as u64).map(|k| pow_mod(w, k, p)).collect();
    let groups = default_tableau_and_groups(&t.shape(), t)?;
    let fills: Vec<Vec<Vec<u8>>> = groups
        .r2
        .iter()
        .map(|x| {
            x.columns()
                .into_iter()
                .map(|c| c.into_iter().map(|v| v - 1).collect())
                .collect()
        })
        .collect();
    let pairs: Vec<((usize, usize), u64)> = if use_orbits {
        PairData::new(d, s, t)?.pair_orbits(true)
    } else {
        let k = fills.len();
        (0..k * k).map(|x| ((x / k, x % k), 1)).collect()
    };
    // minors of (ζ^{jk}) by row and column masks of equal size
    let full = 1usize << d;
    let mut minor = vec![0u64; full * full];
    let bits_of = |m: usize| -> Vec<usize> { (0..d).filter(|&b| m & (1 << b) != 0).collect() };
    let perms_by_len: Vec<Vec<(Vec<u8>, i8)>> = (0..=d).map(all_perms).collect();
    for rm in 1..full {
        let rows = bits_of(rm);
        for cm in 1..full {
            if cm.count_ones() != rm.count_ones() {
                continue;
            }
            let cols = bits_of(cm);
            let mut acc = 0u64;
            for (pi, sg) in &perms_by_len[rows.len()] {
                let e: usize = rows.iter().enumerate().map(|(i, &r)| r * cols[pi[i] as usize]).sum();
                let v = wp[e % d];
                acc = if *sg > 0 { (acc + v) % p } else { (acc + p - v) % p };
            }
            minor[rm * full + cm] = acc;
        }
    }
    let perms = all_perms(d);
    // per filling and relabelling: (mask, ordering sign) for each column
    let col_data: Vec<Vec<(Vec<u16>, i8)>> = fills
        .iter()
        .map(|f| {
            perms
                .iter()
                .map(|(x, sx)| {
                    let mut sign = if s % 2 == 1 { *sx } else { 1 };
                    let masks = f
                        .iter()
                        .map(|col| {
                            let vals: Vec<u8> = col.iter().map(|&a| x[a as usize]).collect();
                            let inv = (0..vals.len())
                                .flat_map(|i| (i + 1..vals.len()).map(move |k| (i, k)))
                                .filter(|&(i, k)| vals[i] > vals[k])
                                .count();
                            if inv % 2 == 1 {
                                sign = -sign;
                            }
                            vals.iter().fold(0u16, |m, &v| m | (1 << v))
                        })
                        .collect();
                    (masks, sign)
                })
                .collect()
        })
        .collect();
    let total = pairs
        .par_iter()
        .map(|&((a, b), orbit)| {
            let mut acc = 0u64;
            for (ma, sa) in &col_data[a] {
                for (mb, sb) in &col_data[b] {
                    let mut prod = 1u64;
                    for (x, y) in ma.iter().zip(mb) {
                        prod = mul_mod(prod, minor[*x as usize * full + *y as usize], p);
                        if prod == 0 {
                            break;
                        }
                    }
                    acc = if sa * sb > 0 {
                        (acc + prod) % p
                    } else {
                        (acc + p - prod) % p
                    };
                }
            }
            mul_mod(acc, orbit % p, p)
        })
        .reduce(|| 0, |x, y| (x + y) % p);
    Ok(total)
}

/// The reduced form for an arbitrary matrix, in floating point.
pub fn unitary_form(d: usize, s: u32, t: &Tableau, m: &[Complex64]) -> Result<Complex64, CertifyError> {
    if m.len() != d * d {
        return Err(CertifyError::BadMatrix { d });
    }
    let data = PairData::new(d, s, t)?;
    let mut hist: FxHashMap<u128, i64> = FxHashMap::default();
    for ((i, j), orbit) in data.pair_orbits(false) {
        let mut h = FxHashMap::default();
        data.histogram(i, j, &mut h);
        for (packed, k) in h {
            *hist.entry(packed).or_default() += k * orbit as i64;
        }
    }
    let perms = all_perms(d);
    Ok(hist
        .into_iter()
        .filter(|(_, k)| *k != 0)
        .map(|(packed, k)| g_matrix(d, s, &data.decode(packed), m, &perms) * k as f64)
        .sum())
}

/// The reduced form for a given filling, without the `dim Ṽ_w = 1` check.
pub fn tableau_form(
    d: usize,
    s: u32,
    t: &Tableau,
    kind: &QuadKind,
    table: &mut FTable,
) -> Result<FormValue, CertifyError> {
    Ok(match kind {
        QuadKind::Identity => FormValue::Exact(CycloInt::from_int(d as u32, identity_form(d, s, t)).expect("d ≥ 1")),
        QuadKind::Fourier => FormValue::Exact(fourier_form(d, s, t, table)?.0),
        QuadKind::Unitary(m) => FormValue::Float(unitary_form(d, s, t, m)?),
    })
}

/// The reduced form `A_kind` for a weight with `dim Ṽ_w = 1`.
pub fn reduced_quadratic_form(
    d: usize,
    w: &Weight,
    t: &Tableau,
    kind: &QuadKind,
    table: &mut FTable,
) -> Result<FormValue, CertifyError> {
    let dim = dim_invariant(d, w)?;
    if dim != 1 {
        return Err(CertifyError::DimNotOne(dim));
    }
    tableau_form(d, w.s(), t, kind, table)
}

/// `|C|·|R_stab|²`, the positive factor dropped by the reduced forms:
/// `vᵀ M^{⊗n} v = common_factor · A_M` for `v = Σ_ρ sgn(ρ)^s ρ^{⊗n} Y_f e_T`.
pub fn common_factor(t: &Tableau) -> BigInt {
    let g = default_tableau_and_groups(&t.shape(), t).expect("shape of its own filling");
    &g.col_order * &g.row_stab_order * &g.row_stab_order
}

/// Dense `vᵀ (ζ_d^{jk})^{⊗n} v`, exact.
pub fn dense_fourier_form(v: &SparseTensor) -> CycloInt {
    let d = v.d();
    let mut hist = vec![BigInt::zero(); d];
    let terms: Vec<(&Vec<u8>, &BigInt)> = v.terms().iter().collect();
    for (a, va) in &terms {
        for (b, vb) in &terms {
            let e: usize = a.iter().zip(b.iter()).map(|(&x, &y)| x as usize * y as usize).sum();
            hist[e % d] += *va * *vb;
        }
    }
    CycloInt::from_exponent_counts(d as u32, &hist).expect("d ≥ 1")
}

/// Dense `vᵀ M^{⊗n} v` in floating point.
pub fn dense_unitary_form(v: &SparseTensor, m: &[Complex64]) -> Complex64 {
    let d = v.d();
    let terms: Vec<(&Vec<u8>, f64)> = v
        .terms()
        .iter()
        .map(|(k, c)| (k, c.to_f64().unwrap_or(f64::NAN)))
        .collect();
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, va) in &terms {
        for (b, vb) in &terms {
            let mut prod = Complex64::new(va * vb, 0.0);
            for (&x, &y) in a.iter().zip(b.iter()) {
                prod *= m[x as usize * d + y as usize];
            }
            acc += prod;
        }
    }
    acc
}

/// Outcome of a single weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    /// `Σ w_i ≠ 0`: the Fourier coefficient vanishes.
    AutoPassZeroSum,
    /// `dim Ṽ_w = 0`: the Fourier coefficient vanishes.
    AutoPassDimZero,
    Pass,
    Fail,
    /// `dim Ṽ_w ≥ 2`, not handled.
    OutOfScope,
}

impl Status {
    pub fn is_pass(self) -> bool {
        matches!(self, Status::AutoPassZeroSum | Status::AutoPassDimZero | Status::Pass)
    }
}

/// Exact verdict for one weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub d: usize,
    pub w: Weight,
    pub dim: u64,
    pub status: Status,
    pub tableau: Option<Tableau>,
    /// `det(F_d)^{-s}·A_fourier`, an integer.
    #[serde(rename = "A_H", serialize_with = "ser_opt_big")]
    pub a_h: Option<BigInt>,
    #[serde(rename = "A_I", serialize_with = "ser_opt_big")]
    pub a_i: Option<BigInt>,
    /// `A_H / (d^{n/2} A_I)` when `n` is even.
    #[serde(serialize_with = "ser_opt_ratio")]
    pub lambda: Option<BigRational>,
    pub lambda_float: Option<f64>,
    /// `|C|·|R_stab|²`.
    #[serde(serialize_with = "ser_opt_big")]
    pub common_factor: Option<BigInt>,
    pub stats: Option<FormStats>,
    pub elapsed_ms: u128,
}

fn ser_opt_big<S: serde::Serializer>(v: &Option<BigInt>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => s.serialize_str(&x.to_string()),
        None => s.serialize_none(),
    }
}

fn ser_opt_ratio<S: serde::Serializer>(v: &Option<BigRational>, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    match v {
        Some(q) => {
            let mut m = s.serialize_map(Some(2))?;
            m.serialize_entry("num", &q.numer().to_string())?;
            m.serialize_entry("den", &q.denom().to_string())?;
            m.end()
        }
        None => s.serialize_none(),
    }
}

/// Description of the sign convention, recorded alongside verdicts.
pub const SIGN_CONVENTION: &str = "G(A,B) = sum over rho, rho' in S_d of sgn(rho rho')^s prod_t M[rho(a_t), rho'(b_t)]";

/// F-tables keyed by `s`, shared across weights.
pub type FTables = BTreeMap<u32, FTable>;

/// `det(F_d)^{-s}` applied to an element of `Z[ζ_d]`, moving to `Z[ζ_lcm(d,4)]` when needed.
fn apply_det_twist(d: usize, s: u32, x: &CycloInt) -> CycloInt {
    let k = fourier_det_exponent(d);
    let e = ((4 - (k * s) % 4) % 4) as i64;
    if e == 0 {
        return x.clone();
    }
    if e == 2 {
        return -x;
    }
    let l = (d as u32).lcm(&4);
    let lifted = x.lift(l).expect("lcm is a multiple");
    let i_pow = CycloInt::zeta_pow(l, e * (l / 4) as i64).expect("l ≥ 4");
    &lifted * &i_pow
}

/// Decides `d·A_H + d^{n/2}·A_I ≥ 0` exactly, with `A_I > 0`.
pub fn inequality_holds(d: usize, n: u32, a_h: &BigInt, a_i: &BigInt) -> bool {
    let dd = BigInt::from(d);
    if n.is_multiple_of(2) {
        let rhs = num_traits::pow(dd.clone(), (n / 2) as usize) * a_i;
        return &dd * a_h + rhs >= BigInt::zero();
    }
    if !a_h.is_negative() {
        return true;
    }
    // d²A_H² ≤ d^n A_I²
    let lhs = &dd * &dd * a_h * a_h;
    let rhs = num_traits::pow(dd, n as usize) * a_i * a_i;
    lhs <= rhs
}

/// The first semistandard filling (content `(s,…,s)`) with `A_I ≠ 0`, and `A_I`.
/// Equivalent to the invariant-vector search without materializing tensors.
pub fn first_nonvanishing(d: usize, w: &Weight) -> Result<Option<(Tableau, BigInt)>, CertifyError> {
    let (s, f) = shape_of_weight(w.as_slice())?;
    for t in ssyt_enumerate(&f, Some(&vec![s; d]), d as u8) {
        let a_i = identity_form(d, s, &t);
        if !a_i.is_zero() {
            return Ok(Some((t, a_i)));
        }
    }
    Ok(None)
}

/// Verifies one weight: auto-pass when the coefficient vanishes, exact
/// inequality when `dim Ṽ_w = 1`, and an explicit out-of-scope verdict otherwise.
pub fn verify_weight(d: usize, w: &Weight, tables: &mut FTables) -> Result<Verdict, CertifyError> {
    let start = Instant::now();
    let mut verdict = Verdict {
        d,
        w: w.clone(),
        dim: 0,
        status: Status::AutoPassZeroSum,
        tableau: None,
        a_h: None,
        a_i: None,
        lambda: None,
        lambda_float: None,
        common_factor: None,
        stats: None,
        elapsed_ms: 0,
    };
    if !w.is_zero_sum() {
        verdict.elapsed_ms = start.elapsed().as_millis();
        return Ok(verdict);
    }
    let dim = dim_invariant(d, w)?;
    verdict.dim = dim;
    if dim == 0 {
        verdict.status = Status::AutoPassDimZero;
        verdict.elapsed_ms = start.elapsed().as_millis();
        return Ok(verdict);
    }
    if dim >= 2 {
        verdict.status = Status::OutOfScope;
        verdict.elapsed_ms = start.elapsed().as_millis();
        return Ok(verdict);
    }
    let s = w.s();
    let (t, a_i) = first_nonvanishing(d, w)?.ok_or_else(|| CertifyError::NoTableau(w.clone()))?;
    let table = tables.entry(s).or_insert_with(|| FTable::new(d, s));
    let (raw, stats) = fourier_form(d, s, &t, table)?;
    let twisted = apply_det_twist(d, s, &raw);
    let a_h = twisted
        .as_rational_integer()
        .ok_or_else(|| CertifyError::NotReal(w.clone()))?;
    let n = w.n();
    let pass = inequality_holds(d, n, &a_h, &a_i);
    let scale = (d as f64).powf(n as f64 / 2.0);
    verdict.lambda_float = Some(a_h.to_f64().unwrap_or(f64::NAN) / (scale * a_i.to_f64().unwrap_or(f64::NAN)));
    if n.is_multiple_of(2) {
        let den = num_traits::pow(BigInt::from(d), (n / 2) as usize) * &a_i;
        verdict.lambda = Some(BigRational::new(a_h.clone(), den));
    }
    verdict.status = if pass { Status::Pass } else { Status::Fail };
    verdict.common_factor = Some(common_factor(&t));
    verdict.tableau = Some(t);
    verdict.a_h = Some(a_h);
    verdict.a_i = Some(a_i);
    verdict.stats = Some(stats);
    verdict.elapsed_ms = start.elapsed().as_millis();
    Ok(verdict)
}

/// Verdicts for every weight with `|w| ≤ k`.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub d: usize,
    pub k: i64,
    pub weights: Vec<Verdict>,
    pub pass: bool,
    pub conclusion: String,
    pub sign_convention: &'static str,
}

/// Runs [`verify_weight`] over the candidate weights and the zero-sum
/// complement. A weight with `dim Ṽ_w ≥ 2` in range aborts the run.
pub fn verify_degree_bound(
    d: usize,
    k: i64,
    tables: &mut FTables,
    mut progress: impl FnMut(&Verdict),
) -> Result<Report, CertifyError> {
    let candidates = enumerate_candidate_weights(d, k);
    let mut weights: Vec<Weight> = candidates.clone();
    weights.extend(all_weights_up_to(d, k).into_iter().filter(|w| !w.is_zero_sum()));
    let mut verdicts = Vec::with_capacity(weights.len());
    for w in &weights {
        let v = verify_weight(d, w, tables)?;
        if v.status == Status::OutOfScope {
            return Err(CertifyError::OutOfScope {
                w: w.clone(),
                dim: v.dim,
            });
        }
        progress(&v);
        verdicts.push(v);
    }
    let pass = verdicts.iter().all(|v| v.status.is_pass());
    let conclusion = if pass {
        if k >= 4 {
            format!("B_{{≤{k}}}({d}) = {}", d + 1)
        } else {
            format!("B_{{≤{k}}}({d}) ≥ {}", d + 1)
        }
    } else {
        format!("no dual bound certified for d = {d}, k = {k}")
    };
    Ok(Report {
        d,
        k,
        weights: verdicts,
        pass,
        conclusion,
        sign_convention: SIGN_CONVENTION,
    })
}

/// One row of the dense small-dimension check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenseEig {
    pub w: Weight,
    pub dim: usize,
    /// Smallest eigenvalue of the Hermitian part of `Π det(H)^{-s} H^{⊗n} Π`
    /// on `Ṽ_w`; absent when the subspace is zero.
    pub min_eig: Option<f64>,
}

/// Dense check for small `d`: for every candidate `w`, build an orthonormal
/// basis of `Ṽ_w` from all projected tableau vectors and return the least
/// eigenvalue of the compressed operator.
pub fn dense_certificate_check(d: usize, h: &[Complex64], max_abs_w: i64) -> Result<Vec<DenseEig>, CertifyError> {
    if h.len() != d * d {
        return Err(CertifyError::BadMatrix { d });
    }
    let hm = DMatrix::from_row_slice(d, d, h);
    let det = hm.determinant();
    let mut out = Vec::new();
    for w in enumerate_candidate_weights(d, max_abs_w) {
        let (s, f) = shape_of_weight(w.as_slice())?;
        let n = f.n();
        let size = num_traits::pow(BigInt::from(d), n as usize);
        if size > BigInt::from(1_000_000) {
            return Err(CertifyError::TooLarge(size));
        }
        if n == 0 {
            out.push(DenseEig {
                w,
                dim: 1,
                min_eig: Some(1.0),
            });
            continue;
        }
        let index = crate::tableaux::balanced_tuples(d, s);
        let mut keys: Vec<&Vec<u8>> = index.keys().collect();
        keys.sort();
        let pos: FxHashMap<&Vec<u8>, usize> = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for t in ssyt_enumerate(&f, Some(&vec![s; d]), d as u8) {
            let v = projected_vector(&t, d, s)?;
            let mut x = vec![0.0; keys.len()];
            for (k, c) in v.terms() {
                x[pos[k]] = c.to_f64().unwrap_or(f64::NAN);
            }
            let norm0 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm0 == 0.0 {
                continue;
            }
            for _ in 0..2 {
                for q in &basis {
                    let dot: f64 = q.iter().zip(&x).map(|(a, b)| a * b).sum();
                    for (xi, qi) in x.iter_mut().zip(q) {
                        *xi -= dot * qi;
                    }
                }
            }
            let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-9 * norm0 {
                basis.push(x.iter().map(|a| a / norm).collect());
            }
        }
        let m = basis.len();
        if m == 0 {
            out.push(DenseEig {
                w,
                dim: 0,
                min_eig: None,
            });
            continue;
        }
        let twist = det.powi(-(s as i32));
        let supports: Vec<Vec<(usize, f64)>> = basis
            .iter()
            .map(|q| {
                q.iter()
                    .enumerate()
                    .filter(|(_, a)| a.abs() > 0.0)
                    .map(|(i, a)| (i, *a))
                    .collect()
            })
            .collect();
        let mut kernel = FxHashMap::default();
        let mut entry = |a: usize, b: usize| -> Complex64 {
            *kernel.entry((a, b)).or_insert_with(|| {
                keys[a]
                    .iter()
                    .zip(keys[b].iter())
                    .map(|(&x, &y)| h[x as usize * d + y as usize])
                    .product::<Complex64>()
            })
        };
        let mut p = DMatrix::<Complex64>::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(a, qa) in &supports[i] {
                    for &(b, qb) in &supports[j] {
                        acc += entry(a, b) * (qa * qb);
                    }
                }
                p[(i, j)] = acc * twist;
            }
        }
        let herm = (&p + p.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(herm);
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        out.push(DenseEig {
            w,
            dim: m,
            min_eig: Some(min),
        });
    }
    Ok(out)
}

/// Size of `[d]^n` restricted to balanced tuples for weight `w`, for guards.
pub fn dense_size(d: usize, w: &Weight) -> BigInt {
    balanced_tuple_count(d, w.s())
}

/// Whether `x` is `one`; convenience for reports of the trivial weight.
pub fn is_unit_lambda(v: &Verdict) -> bool {
    v.lambda.as_ref().is_some_and(|q| q.is_one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hadamard::haar_unitary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fourier_unnormalized(d: usize) -> Vec<Complex64> {
        (0..d * d)
            .map(|k| {
                let (j, l) = (k / d, k % d);
                Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (j * l % d) as f64 / d as f64)
            })
            .collect()
    }

    #[test]
    fn trivial_weight_has_lambda_one() {
        let mut tables = FTables::new();
        let v = verify_weight(3, &Weight::zero(3), &mut tables).unwrap();
        assert_eq!(v.status, Status::Pass);
        assert!(is_unit_lambda(&v));
    }

    #[test]
    fn reduced_equals_dense_small_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (d, s) in [(2usize, 1u32), (2, 2), (3, 1), (3, 2), (4, 1)] {
            let mut table = FTable::new(d, s);
            let f = fourier_unnormalized(d);
            let u = haar_unitary(d, &mut rng).entries().to_vec();
            for shape in crate::symchar::partitions_with_at_most(d as u32 * s, d - 1) {
                for t in ssyt_enumerate(&shape, Some(&vec![s; d]), d as u8) {
                    let v = projected_vector(&t, d, s).unwrap();
                    let k = common_factor(&t);
                    let a_i = identity_form(d, s, &t);
                    assert_eq!(v.norm_sq(), &k * &a_i, "d={d} s={s} T={t}");
                    let (a_h, _) = fourier_form(d, s, &t, &mut table).unwrap();
                    assert_eq!(dense_fourier_form(&v), a_h.scale(&k), "d={d} s={s} T={t}");
                    let kf = k.to_f64().unwrap();
                    for m in [&f, &u] {
                        let dense = dense_unitary_form(&v, m);
                        let red = unitary_form(d, s, &t, m).unwrap() * kf;
                        assert!((dense - red).norm() <= 1e-9 * (1.0 + dense.norm()), "d={d} s={s} T={t}");
                    }
                }
            }
        }
    }

    #[test]
    fn minor_route_agrees_mod_p() {
        for (d, s) in [(2usize, 1u32), (2, 2), (3, 1), (3, 2), (4, 1)] {
            let mut table = FTable::new(d, s);
            let rp = root_primes(d as u64, 1)[0];
            for shape in crate::symchar::partitions_with_at_most(d as u32 * s, d) {
                for t in ssyt_enumerate(&shape, Some(&vec![s; d]), d as u8) {
                    let (a_h, _) = fourier_form(d, s, &t, &mut table).unwrap();
                    for j in (1..d as u64).filter(|j| num_integer::gcd(*j, d as u64) == 1) {
                        let want = cyclo_mod_p(&a_h, &rp, j);
                        for orbits in [false, true] {
                            let got = fourier_form_minors_mod_p(d, s, &t, &rp, j, orbits).unwrap();
                            assert_eq!(got, want, "d={d} s={s} T={t} j={j}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn root_primes_have_roots() {
        for m in [2u64, 3, 4, 6, 12] {
            for rp in root_primes(m, 2) {
                assert_eq!(rp.p % m, 1);
                assert_eq!(pow_mod(rp.root, m, rp.p), 1);
                assert!((1..m).all(|k| pow_mod(rp.root, k, rp.p) != 1));
            }
        }
    }

    #[test]
    fn inequality_edge_cases() {
        // equality counts as a pass
        assert!(inequality_holds(6, 12, &BigInt::from(-(6i64.pow(5))), &BigInt::one()));
        assert!(!inequality_holds(
            6,
            12,
            &BigInt::from(-(6i64.pow(5)) - 1),
            &BigInt::one()
        ));
        // odd n: d = 3, n = 3, threshold A_H ≥ -√3 A_I
        assert!(inequality_holds(3, 3, &BigInt::from(-1), &BigInt::one()));
        assert!(!inequality_holds(3, 3, &BigInt::from(-2), &BigInt::one()));
    }
}
