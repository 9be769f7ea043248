//! S-matrices: `d×d` coincidence counts of two balanced index tuples, kept
//! modulo `d`, together with their canonical forms and the exact sums
//!
//! `F(S) = Σ_{x,y ∈ S_d} sgn(x)^s sgn(y)^s ζ_d^{xᵀ S y}`,
//!
//! where `x`, `y` run over the permutations of `(0, …, d−1)` read as vectors.
//! Permuting rows (or columns) of `S` by `P` multiplies `F` by `sgn(P)^s`, and
//! relabelling rows and columns simultaneously leaves it unchanged.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cyclotomic::CycloInt;
use crate::perm::{all_perms, cycle_type, sign};
use crate::symchar::{partitions_of, Partition};

#[derive(Debug, Error)]
pub enum SMatrixError {
    #[error("expected {expected} entries, found {found}")]
    BadSize { expected: usize, found: usize },
    #[error("entry {0} is not reduced modulo d")]
    EntryRange(u8),
    #[error("row or column sums are not all ≡ {s} (mod {d})")]
    NotMagic { d: usize, s: u32 },
    #[error("index tuples are not balanced over 0..{d}")]
    Unbalanced { d: usize },
    #[error("class enumeration for d = {d}, s = {s} exceeds the tractability guard")]
    TooLarge { d: usize, s: u32 },
    #[error("cache line {line}: {msg}")]
    CorruptLine { line: usize, msg: String },
    #[error("cache record for d = {d}, s = {s} does not belong to this table")]
    ForeignRecord { d: usize, s: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A `d×d` matrix over `Z/dZ` with all row and column sums `≡ s`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SMatrix {
    d: usize,
    s: u32,
    entries: Vec<u8>,
}

impl SMatrix {
    /// Entries are reduced modulo `d` before the magic-square check.
    pub fn new(d: usize, s: u32, entries: Vec<u8>) -> Result<Self, SMatrixError> {
        if entries.len() != d * d {
            return Err(SMatrixError::BadSize {
                expected: d * d,
                found: entries.len(),
            });
        }
        let entries: Vec<u8> = entries.iter().map(|&x| x % d as u8).collect();
        let m = SMatrix { d, s, entries };
        if !m.is_magic() {
            return Err(SMatrixError::NotMagic { d, s });
        }
        Ok(m)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    pub fn entries(&self) -> &[u8] {
        &self.entries
    }

    pub fn at(&self, r: usize, c: usize) -> u8 {
        self.entries[r * self.d + c]
    }

    pub fn is_magic(&self) -> bool {
        let d = self.d;
        let target = (self.s as usize) % d;
        (0..d).all(|r| (0..d).map(|c| self.at(r, c) as usize).sum::<usize>() % d == target)
            && (0..d).all(|c| (0..d).map(|r| self.at(r, c) as usize).sum::<usize>() % d == target)
    }

    /// `-S mod d`.
    pub fn negated(&self) -> SMatrix {
        let d = self.d as u8;
        SMatrix {
            d: self.d,
            s: self.s,
            entries: self.entries.iter().map(|&x| (d - x) % d).collect(),
        }
    }

    /// Row `r` moves to `rows[r]`, column `c` to `cols[c]`.
    pub fn permuted(&self, rows: &[u8], cols: &[u8]) -> SMatrix {
        SMatrix {
            d: self.d,
            s: self.s,
            entries: relabel(&self.entries, self.d, rows, cols),
        }
    }
}

fn relabel(m: &[u8], d: usize, rows: &[u8], cols: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; d * d];
    for r in 0..d {
        for c in 0..d {
            out[rows[r] as usize * d + cols[c] as usize] = m[r * d + c];
        }
    }
    out
}

fn balance(d: usize, idx: &[u8]) -> Option<u32> {
    let mut counts = vec![0u32; d];
    for &x in idx {
        *counts.get_mut(x as usize)? += 1;
    }
    let s = counts[0];
    counts.iter().all(|&c| c == s).then_some(s)
}

/// Exact coincidence counts `#{t : i_t = m, j_t = n}` (not reduced).
pub fn count_matrix(d: usize, i: &[u8], j: &[u8]) -> Result<Vec<u8>, SMatrixError> {
    if i.len() != j.len() || d == 0 {
        return Err(SMatrixError::Unbalanced { d });
    }
    let si = balance(d, i).ok_or(SMatrixError::Unbalanced { d })?;
    let sj = balance(d, j).ok_or(SMatrixError::Unbalanced { d })?;
    if si != sj {
        return Err(SMatrixError::Unbalanced { d });
    }
    let mut m = vec![0u8; d * d];
    for (&a, &b) in i.iter().zip(j) {
        m[a as usize * d + b as usize] += 1;
    }
    Ok(m)
}

/// The S-matrix of two balanced index tuples over `0..d`.
pub fn smatrix_of(d: usize, i: &[u8], j: &[u8]) -> Result<SMatrix, SMatrixError> {
    let counts = count_matrix(d, i, j)?;
    let s = (i.len() / d) as u32;
    SMatrix::new(d, s, counts)
}

/// Canonical representative of an S-matrix class with the sign relating the
/// two `F` values: `F(S) = sign · F(key)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalClass {
    pub key: SMatrix,
    pub sign: i8,
    /// Set when the integer lift was not a sum of `s` permutation matrices and
    /// the key came from direct minimization over row and column permutations.
    pub fallback: bool,
}

/// The permutation with cycles on consecutive blocks of lengths `lambda`
/// (longest first), each block cycled `b ↦ b+1`.
pub fn cycle_representative(lambda: &Partition) -> Vec<u8> {
    let mut p = Vec::new();
    let mut start = 0u8;
    for &l in lambda.parts() {
        for k in 0..l as u8 {
            p.push(start + (k + 1) % l as u8);
        }
        start += l as u8;
    }
    p
}

fn perm_matrix_add(m: &mut [u8], d: usize, p: &[u8]) {
    for (r, &c) in p.iter().enumerate() {
        m[r * d + c as usize] += 1;
    }
}

/// All permutations `π` with `m[r][π(r)] > 0` for every row.
fn matchings(m: &[u8], d: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(d);
    let mut used = vec![false; d];
    fn rec(m: &[u8], d: usize, cur: &mut Vec<u8>, used: &mut [bool], out: &mut Vec<Vec<u8>>) {
        let r = cur.len();
        if r == d {
            out.push(cur.clone());
            return;
        }
        for c in 0..d {
            if !used[c] && m[r * d + c] > 0 {
                used[c] = true;
                cur.push(c as u8);
                rec(m, d, cur, used, out);
                cur.pop();
                used[c] = false;
            }
        }
    }
    rec(m, d, &mut cur, &mut used, &mut out);
    out
}

fn first_matching(m: &[u8], d: usize) -> Option<Vec<u8>> {
    let mut cur = Vec::with_capacity(d);
    let mut used = vec![false; d];
    fn rec(m: &[u8], d: usize, cur: &mut Vec<u8>, used: &mut [bool]) -> bool {
        let r = cur.len();
        if r == d {
            return true;
        }
        for c in 0..d {
            if !used[c] && m[r * d + c] > 0 {
                used[c] = true;
                cur.push(c as u8);
                if rec(m, d, cur, used) {
                    return true;
                }
                cur.pop();
                used[c] = false;
            }
        }
        false
    }
    rec(m, d, &mut cur, &mut used).then_some(cur)
}

/// Cycles of `p`, each starting at its smallest element, longest first.
fn cycles_of(p: &[u8]) -> Vec<Vec<u8>> {
    let mut seen = vec![false; p.len()];
    let mut cycles = Vec::new();
    for start in 0..p.len() {
        if seen[start] {
            continue;
        }
        let mut cyc = Vec::new();
        let mut k = start;
        while !seen[k] {
            seen[k] = true;
            cyc.push(k as u8);
            k = p[k] as usize;
        }
        cycles.push(cyc);
    }
    cycles.sort_by_key(|c| std::cmp::Reverse(c.len()));
    cycles
}

/// Every relabelling `φ` with `φ ∘ γ ∘ φ⁻¹` equal to the block representative
/// of the cycle type of `γ`.
fn conjugators(gamma: &[u8]) -> Vec<Vec<u8>> {
    let cycles = cycles_of(gamma);
    let d = gamma.len();
    // block start for each position in the sorted cycle list
    let mut starts = Vec::new();
    let mut acc = 0u8;
    for c in &cycles {
        starts.push(acc);
        acc += c.len() as u8;
    }
    let mut out = Vec::new();
    let mut phi = vec![0u8; d];
    let mut used_block = vec![false; cycles.len()];
    fn rec(
        ci: usize,
        cycles: &[Vec<u8>],
        starts: &[u8],
        used_block: &mut [bool],
        phi: &mut [u8],
        out: &mut Vec<Vec<u8>>,
    ) {
        if ci == cycles.len() {
            out.push(phi.to_vec());
            return;
        }
        let len = cycles[ci].len();
        for b in 0..cycles.len() {
            if used_block[b] || cycles[b].len() != len {
                continue;
            }
            used_block[b] = true;
            for rot in 0..len {
                for (k, &x) in cycles[ci].iter().enumerate() {
                    phi[x as usize] = starts[b] + ((k + rot) % len) as u8;
                }
                rec(ci + 1, cycles, starts, used_block, phi, out);
            }
            used_block[b] = false;
        }
    }
    rec(0, &cycles, &starts, &mut used_block, &mut phi, &mut out);
    out
}

fn pow_sign(sg: i8, s: u32) -> i8 {
    if s % 2 == 1 {
        sg
    } else {
        1
    }
}

fn reduce_mod(m: &[u8], d: usize) -> Vec<u8> {
    m.iter().map(|&x| x % d as u8).collect()
}

fn lift_is_regular(m: &[u8], d: usize, s: u32) -> bool {
    (0..d).all(|r| (0..d).map(|c| m[r * d + c] as u32).sum::<u32>() == s)
        && (0..d).all(|c| (0..d).map(|r| m[r * d + c] as u32).sum::<u32>() == s)
}

/// Largest `d` handled by [`reduce_counts`].
pub const REDUCE_MAX_D: usize = 16;

/// First perfect matching in the support of `m` (rows in order, columns
/// tried in increasing order), on stack storage.
fn first_matching_fast(m: &[u8], d: usize, out: &mut [u8; REDUCE_MAX_D]) -> bool {
    let mut nz = [0u32; REDUCE_MAX_D];
    for r in 0..d {
        for c in 0..d {
            if m[r * d + c] > 0 {
                nz[r] |= 1 << c;
            }
        }
    }
    fn rec(r: usize, d: usize, used: u32, nz: &[u32; REDUCE_MAX_D], out: &mut [u8; REDUCE_MAX_D]) -> bool {
        if r == d {
            return true;
        }
        let mut free = nz[r] & !used;
        while free != 0 {
            let c = free.trailing_zeros();
            free &= free - 1;
            out[r] = c as u8;
            if rec(r + 1, d, used | (1 << c), nz, out) {
                return true;
            }
        }
        false
    }
    rec(0, d, 0, &nz, out)
}

fn parity_fast(p: &[u8]) -> i8 {
    let mut seen = 0u32;
    let mut odd = false;
    for start in 0..p.len() {
        if seen & (1 << start) != 0 {
            continue;
        }
        let mut k = start;
        let mut len = 0;
        while seen & (1 << k) == 0 {
            seen |= 1 << k;
            k = p[k] as usize;
            len += 1;
        }
        odd ^= len % 2 == 0;
    }
    if odd {
        -1
    } else {
        1
    }
}

/// One reduction of an exact count matrix (row and column sums equal to `s`)
/// to the form `I + C_λ + (rest)`, with `F(counts) = sign · F(key)`.
///
/// The decomposition is the first one found by backtracking, so the key is
/// a member of the parametrized family produced by [`enumerate_classes`] but
/// is not orbit-canonical.
pub fn reduce_counts(counts: &[u8], d: usize, s: u32) -> (Vec<u8>, i8) {
    let mut key = vec![0u8; d * d];
    let sg = reduce_counts_into(counts, d, s, &mut key);
    (key, sg)
}

/// [`reduce_counts`] writing the key into `out` without allocating.
pub fn reduce_counts_into(counts: &[u8], d: usize, s: u32, out: &mut [u8]) -> i8 {
    assert!(d <= REDUCE_MAX_D, "reduce_counts supports d ≤ {REDUCE_MAX_D}");
    let dd = d as u8;
    if s == 0 {
        for (o, &x) in out.iter_mut().zip(counts) {
            *o = x % dd;
        }
        return 1;
    }
    let mut p1 = [0u8; REDUCE_MAX_D];
    assert!(
        first_matching_fast(counts, d, &mut p1),
        "regular count matrix has a perfect matching"
    );
    let sg = pow_sign(parity_fast(&p1[..d]), s);
    // x[p1[r]][c] = counts[r][c]
    let mut x = [0u8; REDUCE_MAX_D * REDUCE_MAX_D];
    for r in 0..d {
        let pr = p1[r] as usize;
        x[pr * d..pr * d + d].copy_from_slice(&counts[r * d..r * d + d]);
    }
    if s == 1 {
        for (o, &v) in out.iter_mut().zip(&x[..d * d]) {
            *o = v % dd;
        }
        return sg;
    }
    let mut rest = x;
    for r in 0..d {
        rest[r * d + r] -= 1;
    }
    let mut gamma = [0u8; REDUCE_MAX_D];
    assert!(
        first_matching_fast(&rest[..d * d], d, &mut gamma),
        "regular count matrix has a perfect matching"
    );
    // cycles in order of their smallest element, then stably by length, longest first
    let mut starts = [0u8; REDUCE_MAX_D];
    let mut lens = [0u8; REDUCE_MAX_D];
    let mut nc = 0;
    let mut seen = 0u32;
    for start in 0..d {
        if seen & (1 << start) != 0 {
            continue;
        }
        let mut k = start;
        let mut len = 0u8;
        while seen & (1 << k) == 0 {
            seen |= 1 << k;
            k = gamma[k] as usize;
            len += 1;
        }
        starts[nc] = start as u8;
        lens[nc] = len;
        nc += 1;
    }
    let mut order = [0usize; REDUCE_MAX_D];
    for (i, o) in order.iter_mut().enumerate().take(nc) {
        *o = i;
    }
    for i in 1..nc {
        let mut j = i;
        while j > 0 && lens[order[j - 1]] < lens[order[j]] {
            order.swap(j - 1, j);
            j -= 1;
        }
    }
    let mut phi = [0u8; REDUCE_MAX_D];
    let mut next = 0u8;
    for &ci in &order[..nc] {
        let mut k = starts[ci] as usize;
        for _ in 0..lens[ci] {
            phi[k] = next;
            next += 1;
            k = gamma[k] as usize;
        }
    }
    for r in 0..d {
        for c in 0..d {
            out[phi[r] as usize * d + phi[c] as usize] = x[r * d + c] % dd;
        }
    }
    sg
}

/// Canonical representative under independent row and column permutations.
///
/// When the integer lift is a sum of `s` permutation matrices the key is the
/// lexicographic minimum of `φ P₁⁻¹ S φ⁻¹` over all decompositions `P₁ + P₂ + ⋯`
/// and all relabellings `φ` taking `P₁⁻¹P₂` to its block cycle representative.
/// That set is the same for every matrix in the orbit, so the key is a class
/// invariant. Otherwise the minimum is taken over all `d!²` row and column
/// permutations and the result is flagged.
pub fn canonicalize(m: &SMatrix) -> CanonicalClass {
    let d = m.d;
    let s = m.s;
    let id: Vec<u8> = (0..d as u8).collect();
    if !lift_is_regular(&m.entries, d, s) {
        return canonicalize_fallback(m);
    }
    if s == 0 {
        return CanonicalClass {
            key: m.clone(),
            sign: 1,
            fallback: false,
        };
    }
    let mut best: Option<(Vec<u8>, i8)> = None;
    for p1 in matchings(&m.entries, d) {
        let x = relabel(&m.entries, d, &p1, &id);
        let sg = pow_sign(sign(&p1), s);
        if s == 1 {
            best = Some((reduce_mod(&x, d), sg));
            break;
        }
        let mut rest = x.clone();
        for r in 0..d {
            rest[r * d + r] -= 1;
        }
        for gamma in matchings(&rest, d) {
            for phi in conjugators(&gamma) {
                let key = reduce_mod(&relabel(&x, d, &phi, &phi), d);
                if best.as_ref().is_none_or(|(b, _)| key < *b) {
                    best = Some((key, sg));
                }
            }
        }
    }
    let (key, sign) = best.expect("regular lift decomposes");
    CanonicalClass {
        key: SMatrix { d, s, entries: key },
        sign,
        fallback: false,
    }
}

fn canonicalize_fallback(m: &SMatrix) -> CanonicalClass {
    let d = m.d;
    let perms = all_perms(d);
    let mut best: Option<(Vec<u8>, i8)> = None;
    for (rp, rs) in &perms {
        let rows = relabel(&m.entries, d, rp, &(0..d as u8).collect::<Vec<_>>());
        for (cp, cs) in &perms {
            let key = relabel(&rows, d, &(0..d as u8).collect::<Vec<_>>(), cp);
            if best.as_ref().is_none_or(|(b, _)| key < *b) {
                best = Some((key, pow_sign(rs * cs, m.s)));
            }
        }
    }
    let (key, sign) = best.expect("at least one permutation");
    CanonicalClass {
        key: SMatrix {
            d,
            s: m.s,
            entries: key,
        },
        sign,
        fallback: true,
    }
}

/// A member of the parametrized family `I + C_λ + P₃ + ⋯ + P_s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassEntry {
    pub lambda: Option<Partition>,
    pub tail: Vec<Vec<u8>>,
    pub key: SMatrix,
}

/// Upper limit on the number of parametrized entries without override.
pub const CLASS_GUARD: usize = 1_000_000;

/// The parametrized family of reduced S-matrices: `0` for `s = 0`, `I` for
/// `s = 1`, and `I + C_λ + P₃ + ⋯ + P_s` over cycle types `λ ⊢ d` and
/// permutations `P_k` otherwise. Every count matrix reduces to one of these
/// keys by [`reduce_counts`]. Distinct parameters can give the same matrix.
pub fn enumerate_classes(d: usize, s: u32, allow_large: bool) -> Result<Vec<ClassEntry>, SMatrixError> {
    let id: Vec<u8> = (0..d as u8).collect();
    if s == 0 {
        return Ok(vec![ClassEntry {
            lambda: None,
            tail: vec![],
            key: SMatrix {
                d,
                s,
                entries: vec![0; d * d],
            },
        }]);
    }
    let mut base = vec![0u8; d * d];
    perm_matrix_add(&mut base, d, &id);
    if s == 1 {
        return Ok(vec![ClassEntry {
            lambda: None,
            tail: vec![],
            key: SMatrix {
                d,
                s,
                entries: reduce_mod(&base, d),
            },
        }]);
    }
    let lambdas = partitions_of(d as u32);
    let perms = all_perms(d);
    let count = (lambdas.len() as f64) * (perms.len() as f64).powi(s as i32 - 2);
    if !allow_large && (count > CLASS_GUARD as f64 || (d == 6 && s > 3)) {
        return Err(SMatrixError::TooLarge { d, s });
    }
    let mut out = Vec::new();
    for lambda in lambdas {
        let mut with_cycle = base.clone();
        perm_matrix_add(&mut with_cycle, d, &cycle_representative(&lambda));
        let mut tails: Vec<(Vec<Vec<u8>>, Vec<u8>)> = vec![(vec![], with_cycle)];
        for _ in 2..s {
            let mut next = Vec::with_capacity(tails.len() * perms.len());
            for (tail, m) in &tails {
                for (p, _) in &perms {
                    let mut m2 = m.clone();
                    perm_matrix_add(&mut m2, d, p);
                    let mut t2 = tail.clone();
                    t2.push(p.clone());
                    next.push((t2, m2));
                }
            }
            tails = next;
        }
        for (tail, m) in tails {
            out.push(ClassEntry {
                lambda: Some(lambda.clone()),
                tail,
                key: SMatrix {
                    d,
                    s,
                    entries: reduce_mod(&m, d),
                },
            });
        }
    }
    Ok(out)
}

/// Distinct key matrices of [`enumerate_classes`], sorted.
pub fn distinct_keys(entries: &[ClassEntry]) -> Vec<SMatrix> {
    let set: BTreeSet<&SMatrix> = entries.iter().map(|e| &e.key).collect();
    set.into_iter().cloned().collect()
}

/// Number of orbits of the parametrized keys under row and column permutations.
pub fn orbit_count(entries: &[ClassEntry]) -> usize {
    let keys = distinct_keys(entries);
    let canon: HashSet<Vec<u8>> = keys.par_iter().map(|k| canonicalize(k).key.entries).collect();
    canon.len()
}

/// Exact `F(S)` in `Z[ζ_d]`.
///
/// The `d!` vectors `S·y` are bucketed first, so the inner loop runs over
/// distinct buckets rather than all of `S_d`, and exponents accumulate in a
/// length-`d` histogram before the cyclotomic element is formed.
pub fn f_value(m: &SMatrix) -> CycloInt {
    let hist = f_histogram(m);
    CycloInt::from_exponent_counts(m.d as u32, &hist).expect("d ≥ 1")
}

/// The exponent histogram behind [`f_value`]: entry `k` is the signed count of
/// pairs `(x, y)` with `xᵀ S y ≡ k (mod d)`.
pub fn f_histogram(m: &SMatrix) -> Vec<i64> {
    let d = m.d;
    let perms = all_perms(d);
    let odd = m.s % 2 == 1;
    let mut buckets: FxHashMap<Vec<u8>, i64> = FxHashMap::default();
    for (y, sg) in &perms {
        let u: Vec<u8> = (0..d)
            .map(|r| {
                let v: usize = (0..d).map(|c| m.at(r, c) as usize * y[c] as usize).sum();
                (v % d) as u8
            })
            .collect();
        *buckets.entry(u).or_default() += if odd { *sg as i64 } else { 1 };
    }
    let buckets: Vec<(Vec<u8>, i64)> = buckets.into_iter().filter(|(_, w)| *w != 0).collect();
    let mut hist = vec![0i64; d];
    for (x, sg) in &perms {
        let sx = if odd { *sg as i64 } else { 1 };
        for (u, w) in &buckets {
            let e: usize = x.iter().zip(u).map(|(&a, &b)| a as usize * b as usize).sum();
            hist[e % d] += sx * w;
        }
    }
    hist
}

/// Term-by-term double-precision evaluation of `F(S)`, for cross-checking.
pub fn f_value_float_direct(m: &SMatrix) -> Complex64 {
    let d = m.d;
    let perms = all_perms(d);
    let odd = m.s % 2 == 1;
    let mut acc = Complex64::new(0.0, 0.0);
    let tau = 2.0 * std::f64::consts::PI / d as f64;
    for (x, sx) in &perms {
        for (y, sy) in &perms {
            let mut e = 0usize;
            for (r, &xr) in x.iter().enumerate() {
                for (c, &yc) in y.iter().enumerate() {
                    e += xr as usize * m.at(r, c) as usize * yc as usize;
                }
            }
            let w = if odd { (*sx * *sy) as f64 } else { 1.0 };
            acc += Complex64::from_polar(w, tau * e as f64);
        }
    }
    acc
}

#[derive(Serialize, Deserialize)]
struct FRecord {
    #[serde(rename = "F")]
    f: CycloInt,
    d: usize,
    key: Vec<u8>,
    s: u32,
}

/// Exact `F` values keyed by reduced S-matrix entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FTable {
    d: usize,
    s: u32,
    values: BTreeMap<Vec<u8>, CycloInt>,
}

/// A skipped line in a lax cache load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedLine {
    pub line: usize,
    pub msg: String,
}

impl FTable {
    pub fn new(d: usize, s: u32) -> Self {
        FTable {
            d,
            s,
            values: BTreeMap::new(),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, key: &[u8]) -> Option<&CycloInt> {
        self.values.get(key)
    }

    pub fn contains(&self, key: &[u8]) -> bool {
        self.values.contains_key(key)
    }

    pub fn insert(&mut self, key: Vec<u8>, value: CycloInt) {
        self.values.insert(key, value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<u8>, &CycloInt)> {
        self.values.iter()
    }

    /// Looks up `key`, computing and storing `F` on a miss.
    pub fn get_or_compute(&mut self, key: &[u8]) -> &CycloInt {
        if !self.values.contains_key(key) {
            let m = SMatrix {
                d: self.d,
                s: self.s,
                entries: key.to_vec(),
            };
            self.values.insert(key.to_vec(), f_value(&m));
        }
        &self.values[key]
    }

    fn record_line(&self, key: &[u8], value: &CycloInt) -> String {
        serde_json::to_string(&FRecord {
            f: value.clone(),
            d: self.d,
            key: key.to_vec(),
            s: self.s,
        })
        .expect("record serializes")
    }

    /// JSON-lines text with records sorted by key.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            out.push_str(&self.record_line(k, v));
            out.push('\n');
        }
        out
    }

    /// Parses JSON-lines text. Bad lines are errors unless `lax`, in which
    /// case they are skipped and reported.
    pub fn from_jsonl(d: usize, s: u32, text: &str, lax: bool) -> Result<(FTable, Vec<SkippedLine>), SMatrixError> {
        let mut table = FTable::new(d, s);
        let mut skipped = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed = serde_json::from_str::<FRecord>(line)
                .map_err(|e| e.to_string())
                .and_then(|r| {
                    if r.d != d || r.s != s {
                        return Err(format!("record for d = {}, s = {}", r.d, r.s));
                    }
                    if r.key.len() != d * d || r.key.iter().any(|&x| x as usize >= d) {
                        return Err("malformed key".to_string());
                    }
                    if r.f.order() as usize != d {
                        return Err("value has the wrong cyclotomic order".to_string());
                    }
                    Ok(r)
                });
            match parsed {
                Ok(r) => {
                    table.values.insert(r.key, r.f);
                }
                Err(msg) if lax => skipped.push(SkippedLine { line: i + 1, msg }),
                Err(msg) => return Err(SMatrixError::CorruptLine { line: i + 1, msg }),
            }
        }
        Ok((table, skipped))
    }

    pub fn load(d: usize, s: u32, path: &Path, lax: bool) -> Result<(FTable, Vec<SkippedLine>), SMatrixError> {
        let text = fs::read_to_string(path)?;
        Self::from_jsonl(d, s, &text, lax)
    }

    /// Writes the sorted table atomically.
    pub fn save(&self, path: &Path) -> Result<(), SMatrixError> {
        let tmp = path.with_extension("jsonl.tmp");
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            w.write_all(self.to_jsonl().as_bytes())?;
            w.flush()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

/// Outcome of an f-table build.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub parametrized_entries: usize,
    pub distinct_keys: usize,
    pub reused: usize,
    pub computed: usize,
    pub skipped_lines: Vec<(usize, String)>,
}

/// Builds the f-table for all keys of [`enumerate_classes`].
///
/// With a `path`, finished records are appended and flushed in chunks so an
/// interrupted build loses at most one chunk; `resume` reuses records already
/// present (bad lines are fatal unless `lax`). The completed file is
/// rewritten sorted by key.
pub fn build_ftable(
    d: usize,
    s: u32,
    path: Option<&Path>,
    resume: bool,
    lax: bool,
    allow_large: bool,
    mut progress: impl FnMut(usize, usize),
) -> Result<(FTable, BuildStats), SMatrixError> {
    let entries = enumerate_classes(d, s, allow_large)?;
    let keys = distinct_keys(&entries);
    let mut stats = BuildStats {
        parametrized_entries: entries.len(),
        distinct_keys: keys.len(),
        ..Default::default()
    };
    let mut table = FTable::new(d, s);
    if let (Some(p), true) = (path, resume) {
        if p.exists() {
            let (t, skipped) = FTable::load(d, s, p, lax)?;
            stats.skipped_lines = skipped.into_iter().map(|x| (x.line, x.msg)).collect();
            table = t;
        }
    }
    let todo: Vec<&SMatrix> = keys.iter().filter(|k| !table.contains(&k.entries)).collect();
    stats.reused = keys.len() - todo.len();
    let mut sink = match path {
        Some(p) => {
            let mut opts = OpenOptions::new();
            opts.create(true);
            if resume {
                opts.append(true);
            } else {
                opts.write(true).truncate(true);
            }
            Some(BufWriter::new(opts.open(p)?))
        }
        None => None,
    };
    // a resumed file with skipped lines is rewritten clean at the end
    const CHUNK: usize = 64;
    for chunk in todo.chunks(CHUNK) {
        let values: Vec<CycloInt> = chunk.par_iter().map(|k| f_value(k)).collect();
        for (k, v) in chunk.iter().zip(values) {
            if let Some(w) = sink.as_mut() {
                writeln!(w, "{}", table.record_line(&k.entries, &v))?;
            }
            table.insert(k.entries.clone(), v);
        }
        if let Some(w) = sink.as_mut() {
            w.flush()?;
        }
        stats.computed += chunk.len();
        progress(stats.reused + stats.computed, keys.len());
    }
    drop(sink);
    if let Some(p) = path {
        table.save(p)?;
    }
    Ok((table, stats))
}

/// Reads a cache file line by line, returning every record that fails to parse.
pub fn scan_cache(path: &Path) -> Result<Vec<SkippedLine>, SMatrixError> {
    let f = File::open(path)?;
    let mut bad = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if let Err(e) = serde_json::from_str::<FRecord>(&line) {
            bad.push(SkippedLine {
                line: i + 1,
                msg: e.to_string(),
            });
        }
    }
    Ok(bad)
}

/// Cycle type of the permutation `P₁⁻¹P₂` read off a reduced key `I + C_λ + ⋯`.
pub fn key_cycle_type(key: &[u8], d: usize) -> Option<Partition> {
    let mut rest = key.to_vec();
    for r in 0..d {
        if rest[r * d + r] == 0 {
            return None;
        }
        rest[r * d + r] -= 1;
    }
    let g = first_matching(&rest, d)?;
    Some(Partition::from_unsorted(cycle_type(&g)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_balanced(d: usize, s: u32, rng: &mut ChaCha8Rng) -> Vec<u8> {
        let mut v: Vec<u8> = (0..d as u8).flat_map(|x| std::iter::repeat_n(x, s as usize)).collect();
        v.shuffle(rng);
        v
    }

    fn random_counts(d: usize, s: u32, seed: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let i = random_balanced(d, s, &mut rng);
        let j = random_balanced(d, s, &mut rng);
        count_matrix(d, &i, &j).unwrap()
    }

    #[test]
    fn aligned_tuples_give_scaled_identity() {
        let i: Vec<u8> = vec![0, 0, 1, 1, 2, 2];
        let m = smatrix_of(3, &i, &i).unwrap();
        assert_eq!(m.entries(), &[2, 0, 0, 0, 2, 0, 0, 0, 2]);
        let m = smatrix_of(3, &[0, 1, 2], &[1, 2, 0]).unwrap();
        assert_eq!(m.entries(), &[0, 1, 0, 0, 0, 1, 1, 0, 0]);
        assert!(smatrix_of(3, &[0, 0, 1], &[0, 1, 2]).is_err());
    }

    #[test]
    fn permutation_matrices_collapse_to_identity() {
        for (p, sg) in all_perms(4) {
            let mut m = vec![0u8; 16];
            perm_matrix_add(&mut m, 4, &p);
            let c = canonicalize(&SMatrix::new(4, 1, m).unwrap());
            assert_eq!(c.key.entries(), &[1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1]);
            assert_eq!(c.sign, sg);
        }
    }

    #[test]
    fn class_counts() {
        assert_eq!(enumerate_classes(6, 1, false).unwrap().len(), 1);
        let two = enumerate_classes(6, 2, false).unwrap();
        assert_eq!(two.len(), 11);
        assert_eq!(distinct_keys(&two).len(), 11);
        assert_eq!(orbit_count(&two), 11);
        assert!(enumerate_classes(6, 4, false).is_err());
    }

    #[test]
    fn cycle_representatives() {
        let l = Partition::new(vec![3, 2, 1]).unwrap();
        assert_eq!(cycle_representative(&l), vec![1, 2, 0, 4, 3, 5]);
        let key = enumerate_classes(6, 2, false).unwrap()[3].key.clone();
        assert_eq!(
            key_cycle_type(key.entries(), 6),
            enumerate_classes(6, 2, false).unwrap()[3].lambda
        );
    }

    #[test]
    fn small_f_values() {
        // s = 0: every term is 1
        let z = SMatrix::new(3, 0, vec![0; 9]).unwrap();
        assert_eq!(f_value(&z).as_rational_integer(), Some(BigInt::from(36)));
        // F(I) for s = 1 equals Σ_{x,y} sgn(xy) ζ^{x·y}
        let id = SMatrix::new(3, 1, vec![1, 0, 0, 0, 1, 0, 0, 0, 1]).unwrap();
        let direct = f_value_float_direct(&id);
        assert!((f_value(&id).embed_float() - direct).norm() < 1e-9);
    }

    #[test]
    fn fallback_fires_on_wraparound() {
        // d = 2, s = 2: the reduced lift of 2I is the zero matrix, whose sums are 0 ≠ 2
        let m = SMatrix::new(2, 2, vec![2, 0, 0, 2]).unwrap();
        let c = canonicalize(&m);
        assert!(c.fallback);
        assert_eq!(c.key.entries(), &[0, 0, 0, 0]);
    }

    #[test]
    fn jsonl_round_trip_and_corruption() {
        let mut t = FTable::new(6, 2);
        for e in enumerate_classes(6, 2, false).unwrap().iter().take(3) {
            t.insert(e.key.entries().to_vec(), f_value(&e.key));
        }
        let text = t.to_jsonl();
        assert!(text.starts_with("{\"F\":{\"order\":6,\"coeffs\":["));
        let (back, skipped) = FTable::from_jsonl(6, 2, &text, false).unwrap();
        assert_eq!(back, t);
        assert!(skipped.is_empty());
        let broken = format!("{text}{{not json\n");
        match FTable::from_jsonl(6, 2, &broken, false) {
            Err(SMatrixError::CorruptLine { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected corrupt line error, got {other:?}"),
        }
        let (lax, skipped) = FTable::from_jsonl(6, 2, &broken, true).unwrap();
        assert_eq!(lax, t);
        assert_eq!(skipped.len(), 1);
    }

    #[test]
    fn resumed_build_matches_fresh_build() {
        let dir = tempfile::tempdir().unwrap();
        let fresh = dir.path().join("fresh.jsonl");
        let (full, stats) = build_ftable(4, 3, Some(&fresh), false, false, false, |_, _| {}).unwrap();
        assert_eq!(stats.computed, stats.distinct_keys);
        let text = fs::read_to_string(&fresh).unwrap();
        let partial = dir.path().join("partial.jsonl");
        let lines: Vec<&str> = text.lines().collect();
        // interrupted mid-way, including a torn final line
        let mut cut = lines[..lines.len() / 2].join("\n");
        cut.push('\n');
        cut.push_str(&lines[lines.len() / 2][..10]);
        fs::write(&partial, cut).unwrap();
        assert!(build_ftable(4, 3, Some(&partial), true, false, false, |_, _| {}).is_err());
        let (resumed, stats) = build_ftable(4, 3, Some(&partial), true, true, false, |_, _| {}).unwrap();
        assert_eq!(stats.reused, lines.len() / 2);
        assert_eq!(resumed, full);
        assert_eq!(fs::read_to_string(&partial).unwrap(), text);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn magic_property(d in 2usize..=6, s in 1u32..=4, seed in any::<u64>()) {
            let counts = random_counts(d, s, seed);
            let m = SMatrix::new(d, s, counts).unwrap();
            prop_assert!(m.is_magic());
            let c = canonicalize(&m);
            prop_assert!(c.key.is_magic());
        }

        #[test]
        fn sign_rule_under_permutations(d in 3usize..=5, s in 1u32..=3, seed in any::<u64>(), a in 0usize..120, b in 0usize..120) {
            let m = SMatrix::new(d, s, random_counts(d, s, seed)).unwrap();
            let perms = all_perms(d);
            let (p, sp) = &perms[a % perms.len()];
            let (q, sq) = &perms[b % perms.len()];
            let moved = m.permuted(p, q);
            let sg = pow_sign(sp * sq, s) as i64;
            prop_assert_eq!(f_value(&moved), f_value(&m).scale(&BigInt::from(sg)));
            prop_assert_eq!(f_value(&m).conj(), f_value(&m.negated()));
        }

        #[test]
        fn canonical_form_is_a_class_invariant(d in 3usize..=5, s in 1u32..=3, seed in any::<u64>(), a in 0usize..120, b in 0usize..120) {
            let m = SMatrix::new(d, s, random_counts(d, s, seed)).unwrap();
            let perms = all_perms(d);
            let moved = m.permuted(&perms[a % perms.len()].0, &perms[b % perms.len()].0);
            let c1 = canonicalize(&m);
            let c2 = canonicalize(&moved);
            prop_assert_eq!(&c1.key, &c2.key);
            let again = canonicalize(&c1.key);
            prop_assert_eq!(&again.key, &c1.key);
            prop_assert_eq!(f_value(&m), f_value(&c1.key).scale(&BigInt::from(c1.sign as i64)));
        }

        #[test]
        fn fast_reduction_preserves_f(d in 3usize..=6, s in 1u32..=3, seed in any::<u64>()) {
            let counts = random_counts(d, s, seed);
            let (key, sg) = reduce_counts(&counts, d, s);
            let m = SMatrix::new(d, s, counts).unwrap();
            let k = SMatrix::new(d, s, key).unwrap();
            if s >= 2 && (s as usize) < d {
                prop_assert!(key_cycle_type(k.entries(), d).is_some());
            }
            prop_assert_eq!(f_value(&m), f_value(&k).scale(&BigInt::from(sg as i64)));
        }
    }
}
