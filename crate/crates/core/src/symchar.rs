//! Partitions, class functions and exact character values of symmetric groups.
//!
//! Irreducible characters are evaluated with the Murnaghan–Nakayama rule on
//! β-sets (bead positions), memoized on `(β-set, remaining cycle lengths)`.
//! The zero-weight character of `S_d` is assembled class by class over the
//! wreath product `S_s ≀ S_d`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{OnceLock, RwLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CharError {
    #[error("parts must be positive and weakly decreasing: {0:?}")]
    NotAPartition(Vec<u32>),
    #[error("partition sizes differ: {0} vs {1}")]
    SizeMismatch(u32, u32),
    #[error("weight {0:?} is not weakly decreasing")]
    NotDecreasing(Vec<i64>),
    #[error("weight {0:?} does not sum to zero; its zero-weight space is empty")]
    NonZeroSum(Vec<i64>),
    #[error("weight has length {found}, expected {expected}")]
    WrongLength { expected: usize, found: usize },
    #[error("degree {0} is too large for the character evaluator")]
    TooLarge(u32),
    #[error("multiplicity of {psi} in the zero-weight character is {value}, not a non-negative integer")]
    BadMultiplicity { psi: Partition, value: BigRational },
}

/// A weakly decreasing sequence of positive integers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Partition {
    parts: Vec<u32>,
}

impl Partition {
    pub fn new(parts: Vec<u32>) -> Result<Self, CharError> {
        if parts.contains(&0) || parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(CharError::NotAPartition(parts));
        }
        Ok(Partition { parts })
    }

    /// Sorts the input and drops zeros.
    pub fn from_unsorted(mut parts: Vec<u32>) -> Self {
        parts.retain(|&p| p > 0);
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Partition { parts }
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    pub fn n(&self) -> u32 {
        self.parts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn conjugate(&self) -> Partition {
        let width = self.parts.first().copied().unwrap_or(0);
        let parts = (1..=width)
            .map(|j| self.parts.iter().filter(|&&p| p >= j).count() as u32)
            .collect();
        Partition { parts }
    }

    /// Centralizer order `z_μ = Π_i i^{m_i} m_i!`.
    pub fn z(&self) -> BigInt {
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for &p in &self.parts {
            *counts.entry(p).or_default() += 1;
        }
        let mut z = BigInt::one();
        for (p, m) in counts {
            for k in 1..=m {
                z *= BigInt::from(p) * BigInt::from(k);
            }
        }
        z
    }

    /// Size of the conjugacy class of `S_n` with this cycle type.
    pub fn class_size(&self) -> BigInt {
        factorial(self.n()) / self.z()
    }

    /// Sign of any permutation with this cycle type.
    pub fn sign(&self) -> i32 {
        if (self.n() as usize - self.len()).is_multiple_of(2) {
            1
        } else {
            -1
        }
    }

    /// Number of standard tableaux of this shape, by the hook length formula.
    pub fn dimension(&self) -> BigInt {
        let conj = self.conjugate();
        let mut hooks = BigInt::one();
        for (i, &row) in self.parts.iter().enumerate() {
            for j in 0..row as usize {
                let arm = row as usize - j - 1;
                let leg = conj.parts[j] as usize - i - 1;
                hooks *= BigInt::from(arm + leg + 1);
            }
        }
        factorial(self.n()) / hooks
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

pub fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// All partitions of `n`, in reverse lexicographic order: `(n)` first and
/// `(1,…,1)` last.
pub fn partitions_of(n: u32) -> Vec<Partition> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(rem: u32, max: u32, cur: &mut Vec<u32>, out: &mut Vec<Partition>) {
        if rem == 0 {
            out.push(Partition { parts: cur.clone() });
            return;
        }
        for p in (1..=rem.min(max)).rev() {
            cur.push(p);
            rec(rem - p, p, cur, out);
            cur.pop();
        }
    }
    rec(n, n, &mut cur, &mut out);
    out
}

/// Partitions of `n` with at most `max_parts` parts, same order as [`partitions_of`].
pub fn partitions_with_at_most(n: u32, max_parts: usize) -> Vec<Partition> {
    partitions_of(n).into_iter().filter(|p| p.len() <= max_parts).collect()
}

/// Cycle types of `S_n` paired with their class sizes `n!/z_μ`.
pub fn conjugacy_classes(n: u32) -> Vec<(Partition, BigInt)> {
    partitions_of(n)
        .into_iter()
        .map(|p| {
            let size = p.class_size();
            (p, size)
        })
        .collect()
}

type MnKey = (u128, Vec<u8>);

fn mn_memo() -> &'static RwLock<HashMap<MnKey, i128>> {
    static MEMO: OnceLock<RwLock<HashMap<MnKey, i128>>> = OnceLock::new();
    MEMO.get_or_init(|| RwLock::new(HashMap::new()))
}

fn normalize_beads(mut mask: u128) -> u128 {
    while mask & 1 == 1 {
        mask >>= 1;
    }
    mask
}

fn beads_of(lambda: &Partition) -> u128 {
    let l = lambda.len();
    let mut mask = 0u128;
    for (i, &p) in lambda.parts.iter().enumerate() {
        mask |= 1u128 << (p as usize + l - 1 - i);
    }
    mask
}

fn mn_rec(mask: u128, mu: &[u8]) -> i128 {
    let mask = normalize_beads(mask);
    if mu.is_empty() {
        return if mask == 0 { 1 } else { 0 };
    }
    let key = (mask, mu.to_vec());
    if let Some(&v) = mn_memo().read().expect("memo poisoned").get(&key) {
        return v;
    }
    let r = mu[0] as u32;
    let rest = &mu[1..];
    let mut total = 0i128;
    let mut bits = mask;
    while bits != 0 {
        let p = bits.trailing_zeros();
        bits &= bits - 1;
        if p < r {
            continue;
        }
        let q = p - r;
        if mask & (1u128 << q) != 0 {
            continue;
        }
        // beads strictly between q and p give the leg length
        let between = (mask >> (q + 1)) & ((1u128 << (r - 1)) - 1);
        let sign = if between.count_ones().is_multiple_of(2) { 1 } else { -1 };
        let next = (mask & !(1u128 << p)) | (1u128 << q);
        total += sign * mn_rec(next, rest);
    }
    mn_memo().write().expect("memo poisoned").insert(key, total);
    total
}

/// The irreducible character value `χ^λ(μ)`.
pub fn mn_character(lambda: &Partition, mu: &Partition) -> Result<i128, CharError> {
    if lambda.n() != mu.n() {
        return Err(CharError::SizeMismatch(lambda.n(), mu.n()));
    }
    if lambda.n() > 60 {
        return Err(CharError::TooLarge(lambda.n()));
    }
    let mu_parts: Vec<u8> = mu.parts.iter().map(|&p| p as u8).collect();
    Ok(mn_rec(beads_of(lambda), &mu_parts))
}

/// An integer-valued class function on `S_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassFunction {
    n: u32,
    values: BTreeMap<Partition, BigInt>,
}

impl ClassFunction {
    pub fn new(n: u32, values: BTreeMap<Partition, BigInt>) -> Result<Self, CharError> {
        for mu in values.keys() {
            if mu.n() != n {
                return Err(CharError::SizeMismatch(n, mu.n()));
            }
        }
        let mut full = BTreeMap::new();
        for mu in partitions_of(n) {
            let v = values.get(&mu).cloned().unwrap_or_default();
            full.insert(mu, v);
        }
        Ok(ClassFunction { n, values: full })
    }

    pub fn from_fn(n: u32, mut f: impl FnMut(&Partition) -> BigInt) -> Self {
        let values = partitions_of(n).into_iter().map(|mu| {
            let v = f(&mu);
            (mu, v)
        });
        ClassFunction {
            n,
            values: values.collect(),
        }
    }

    pub fn irreducible(lambda: &Partition) -> Result<Self, CharError> {
        let n = lambda.n();
        let mut values = BTreeMap::new();
        for mu in partitions_of(n) {
            let v = mn_character(lambda, &mu)?;
            values.insert(mu, BigInt::from(v));
        }
        Ok(ClassFunction { n, values })
    }

    pub fn trivial(n: u32) -> Self {
        Self::from_fn(n, |_| BigInt::one())
    }

    pub fn sign(n: u32) -> Self {
        Self::from_fn(n, |mu| BigInt::from(mu.sign()))
    }

    /// Character of the regular representation.
    pub fn regular(n: u32) -> Self {
        Self::from_fn(n, |mu| {
            if mu.parts.iter().all(|&p| p == 1) {
                factorial(n)
            } else {
                BigInt::zero()
            }
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn values(&self) -> &BTreeMap<Partition, BigInt> {
        &self.values
    }

    pub fn at(&self, mu: &Partition) -> Option<&BigInt> {
        self.values.get(mu)
    }

    pub fn at_identity(&self) -> BigInt {
        let id = Partition {
            parts: vec![1; self.n as usize],
        };
        self.values[&id].clone()
    }
}

/// `⟨f, g⟩ = (1/n!) Σ_μ |class μ| f(μ) g(μ)`.
pub fn class_inner(f: &ClassFunction, g: &ClassFunction) -> Result<BigRational, CharError> {
    if f.n != g.n {
        return Err(CharError::SizeMismatch(f.n, g.n));
    }
    let mut acc = BigInt::zero();
    for (mu, fv) in &f.values {
        let gv = &g.values[mu];
        acc += mu.class_size() * fv * gv;
    }
    Ok(BigRational::new(acc, factorial(f.n)))
}

/// Number of semistandard tableaux of `shape` with the given content.
pub fn kostka_count(shape: &Partition, content: &[u32]) -> BigInt {
    let total: u32 = content.iter().sum();
    if total != shape.n() {
        return BigInt::zero();
    }
    let mut memo = HashMap::new();
    kostka_rec(&shape.parts, content, &mut memo)
}

// Strip the largest letter: the cells holding it form a horizontal strip.
fn kostka_rec(shape: &[u32], content: &[u32], memo: &mut HashMap<(Vec<u32>, usize), BigInt>) -> BigInt {
    let Some((&last, rest)) = content.split_last() else {
        return if shape.iter().all(|&p| p == 0) {
            BigInt::one()
        } else {
            BigInt::zero()
        };
    };
    let key = (shape.to_vec(), content.len());
    if let Some(v) = memo.get(&key) {
        return v.clone();
    }
    let mut total = BigInt::zero();
    let mut inner = shape.to_vec();
    strips(shape, 0, last, &mut inner, &mut |smaller| {
        total += kostka_rec(smaller, rest, memo);
    });
    memo.insert(key, total.clone());
    total
}

// Enumerate inner shapes `inner` with shape/inner a horizontal strip of `size` cells.
fn strips(shape: &[u32], row: usize, size: u32, inner: &mut Vec<u32>, visit: &mut dyn FnMut(&[u32])) {
    if row == shape.len() {
        if size == 0 {
            let trimmed: Vec<u32> = inner.iter().copied().filter(|&p| p > 0).collect();
            visit(&trimmed);
        }
        return;
    }
    let below = shape.get(row + 1).copied().unwrap_or(0);
    let max_remove = (shape[row] - below).min(size);
    for k in 0..=max_remove {
        inner[row] = shape[row] - k;
        strips(shape, row + 1, size - k, inner, visit);
    }
    inner[row] = shape[row];
}

/// Partitions of `s` with their centralizer orders, used for the wreath-product classes.
fn small_classes(s: u32) -> Vec<(Partition, BigInt)> {
    partitions_of(s)
        .into_iter()
        .map(|k| {
            let z = k.z();
            (k, z)
        })
        .collect()
}

/// Summary of the zero-weight character computation.
#[derive(Debug, Clone)]
pub struct ZeroWeightCharacter {
    pub chi0: ClassFunction,
    /// Multiplicities `c_ψ` of each irreducible `ψ` of `S_d` in `χ_0`.
    pub multiplicities: BTreeMap<Partition, BigInt>,
}

/// The character `χ_0` of `S_d` on the zero-weight space of the `U(d)`-irrep
/// with highest weight `w`.
///
/// For each cycle type `ρ` of `S_d` the induced-character sum over the
/// normalizer `S_s ≀ S_d` of `S_s × ⋯ × S_s` is taken class by class: a cycle
/// of `ρ` of length `ℓ` carries an `S_s` cycle type `κ`, contributing cycles
/// `ℓ·κ` to an element of `S_n`. Frobenius reciprocity then gives the
/// multiplicity of each irreducible `ψ`, which must be a non-negative integer.
pub fn zero_weight_sd_character(w: &[i64], d: usize) -> Result<ZeroWeightCharacter, CharError> {
    if w.len() != d {
        return Err(CharError::WrongLength {
            expected: d,
            found: w.len(),
        });
    }
    if w.windows(2).any(|p| p[0] < p[1]) {
        return Err(CharError::NotDecreasing(w.to_vec()));
    }
    if w.iter().sum::<i64>() != 0 {
        return Err(CharError::NonZeroSum(w.to_vec()));
    }
    let s = (-w[d - 1]) as u32;
    let f = Partition::from_unsorted(w.iter().map(|&x| (x + s as i64) as u32).collect());
    let n = f.n();
    if n > 60 {
        return Err(CharError::TooLarge(n));
    }
    let kappas = small_classes(s);
    let s_fact = factorial(s);
    let mut chi_f_memo: HashMap<Partition, BigInt> = HashMap::new();

    // W(ρ) = Σ over assignments of κ_c to the cycles c of ρ of
    //        Π_c (s!)^{ℓ_c − 1} |K_{κ_c}| · χ^f(∪_c ℓ_c κ_c)
    let mut wreath = |rho: &Partition| -> Result<BigInt, CharError> {
        let mut total = BigInt::zero();
        let cycles = rho.parts.clone();
        let mut choice = vec![0usize; cycles.len()];
        loop {
            let mut parts = Vec::new();
            let mut weight = BigInt::one();
            for (c, &l) in cycles.iter().enumerate() {
                let (kappa, z) = &kappas[choice[c]];
                parts.extend(kappa.parts.iter().map(|&k| k * l));
                weight *= num_traits::pow(s_fact.clone(), l as usize - 1) * (&s_fact / z);
            }
            let mu = Partition::from_unsorted(parts);
            let chi = match chi_f_memo.get(&mu) {
                Some(v) => v.clone(),
                None => {
                    let v = BigInt::from(mn_character(&f, &mu)?);
                    chi_f_memo.insert(mu, v.clone());
                    v
                }
            };
            total += weight * chi;
            // odometer over κ choices
            let mut c = 0;
            loop {
                if c == choice.len() {
                    return Ok(total);
                }
                choice[c] += 1;
                if choice[c] < kappas.len() {
                    break;
                }
                choice[c] = 0;
                c += 1;
            }
        }
    };

    let d32 = d as u32;
    let classes = conjugacy_classes(d32);
    let mut wvals = Vec::with_capacity(classes.len());
    for (rho, _) in &classes {
        wvals.push(wreath(rho)?);
    }
    let denom = num_traits::pow(s_fact, d) * factorial(d32);
    let mut multiplicities = BTreeMap::new();
    let mut chi0_vals: BTreeMap<Partition, BigInt> = BTreeMap::new();
    for psi in partitions_of(d32) {
        let mut acc = BigInt::zero();
        for ((rho, size), wv) in classes.iter().zip(&wvals) {
            acc += size * BigInt::from(mn_character(&psi, rho)?) * wv;
        }
        let c = BigRational::new(acc, denom.clone());
        if !c.is_integer() || c.is_negative() {
            return Err(CharError::BadMultiplicity { psi, value: c });
        }
        let c = c.to_integer();
        if !c.is_zero() {
            for rho in partitions_of(d32) {
                let v = BigInt::from(mn_character(&psi, &rho)?);
                *chi0_vals.entry(rho).or_default() += &c * v;
            }
        }
        multiplicities.insert(psi, c);
    }
    Ok(ZeroWeightCharacter {
        chi0: ClassFunction::new(d32, chi0_vals)?,
        multiplicities,
    })
}
