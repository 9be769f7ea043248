//! Candidate highest weights and the dimensions of their zero-weight,
//! `S_d`-invariant subspaces `Ṽ_w`.
//!
//! A weight `w` is realized inside `(C^d)^{⊗n} ⊗ det^{-s}` with `s = |w_d|`,
//! `f_i = w_i − w_d` and `n = Σ f_i`; the twist by the determinant is why the
//! signed `S_d` action (sign to the power `s`) appears throughout.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::symchar::{class_inner, kostka_count, zero_weight_sd_character, CharError, ClassFunction, Partition};
use crate::tableaux::{balanced_tuple_count, projected_vector, ssyt_enumerate, TableauError};

#[derive(Debug, Error)]
pub enum ZwError {
    #[error("weight {0:?} is not weakly decreasing")]
    NotDecreasing(Vec<i64>),
    #[error("weight has length {found}, expected {expected}")]
    WrongLength { expected: usize, found: usize },
    #[error("dense oracle needs {0} coordinates, above the limit of 10^6")]
    TooLarge(BigInt),
    #[error(transparent)]
    Char(#[from] CharError),
    #[error(transparent)]
    Tableau(#[from] TableauError),
}

/// A weakly decreasing integer vector indexing an irreducible representation of `U(d)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Weight {
    w: Vec<i64>,
}

impl Weight {
    pub fn new(w: Vec<i64>) -> Result<Self, ZwError> {
        if w.windows(2).any(|p| p[0] < p[1]) {
            return Err(ZwError::NotDecreasing(w));
        }
        Ok(Weight { w })
    }

    pub fn zero(d: usize) -> Self {
        Weight { w: vec![0; d] }
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.w
    }

    pub fn d(&self) -> usize {
        self.w.len()
    }

    /// `s = |w_d|`, the power of the determinant twist.
    pub fn s(&self) -> u32 {
        self.w.last().map_or(0, |x| x.unsigned_abs() as u32)
    }

    /// `f_i = w_i − w_d`, the Young diagram of the untwisted tensor representation.
    pub fn f(&self) -> Partition {
        let last = self.w.last().copied().unwrap_or(0);
        Partition::from_unsorted(self.w.iter().map(|&x| (x - last) as u32).collect())
    }

    pub fn n(&self) -> u32 {
        self.f().n()
    }

    /// `|w| = Σ |w_i|`.
    pub fn norm1(&self) -> i64 {
        self.w.iter().map(|x| x.abs()).sum()
    }

    pub fn sum(&self) -> i64 {
        self.w.iter().sum()
    }

    pub fn is_zero_sum(&self) -> bool {
        self.sum() == 0
    }

    /// `w ↦ −reverse(w)`, the weight of the dual representation.
    pub fn dual(&self) -> Weight {
        Weight {
            w: self.w.iter().rev().map(|x| -x).collect(),
        }
    }

    /// At most two positive and at most two negative entries.
    pub fn has_two_by_two_pattern(&self) -> bool {
        self.w.iter().filter(|&&x| x > 0).count() <= 2 && self.w.iter().filter(|&&x| x < 0).count() <= 2
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.w.iter().map(|x| x.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Every weakly decreasing `w ∈ Z^d` with `|w| ≤ k`, in decreasing lexicographic order.
pub fn all_weights_up_to(d: usize, k: i64) -> Vec<Weight> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(d);
    fn rec(d: usize, budget: i64, max: i64, cur: &mut Vec<i64>, out: &mut Vec<Weight>) {
        if cur.len() == d {
            out.push(Weight { w: cur.clone() });
            return;
        }
        for x in (-budget..=max.min(budget)).rev() {
            cur.push(x);
            rec(d, budget - x.abs(), x, cur, out);
            cur.pop();
        }
    }
    rec(d, k, k, &mut cur, &mut out);
    out
}

/// Weights that can carry a non-zero Fourier coefficient for degree `k`:
/// zero sum, `|w| ≤ k`, and positive and negative parts each at most `⌊k/2⌋`.
pub fn enumerate_candidate_weights(d: usize, k: i64) -> Vec<Weight> {
    let half = k / 2;
    all_weights_up_to(d, k)
        .into_iter()
        .filter(|w| {
            let pos: i64 = w.w.iter().filter(|&&x| x > 0).sum();
            let neg: i64 = w.w.iter().filter(|&&x| x < 0).sum();
            w.is_zero_sum() && pos <= half && neg >= -half
        })
        .collect()
}

fn check_len(d: usize, w: &Weight) -> Result<(), ZwError> {
    if w.d() != d {
        return Err(ZwError::WrongLength {
            expected: d,
            found: w.d(),
        });
    }
    Ok(())
}

/// `dim Ṽ_w = ⟨χ_0, χ⟩` with `χ` trivial for even `s` and the sign character for odd `s`.
/// Weights with non-zero sum have an empty zero-weight space and give 0.
pub fn dim_invariant(d: usize, w: &Weight) -> Result<u64, ZwError> {
    check_len(d, w)?;
    if !w.is_zero_sum() {
        return Ok(0);
    }
    let z = zero_weight_sd_character(w.as_slice(), d)?;
    let chi = if w.s().is_multiple_of(2) {
        ClassFunction::trivial(d as u32)
    } else {
        ClassFunction::sign(d as u32)
    };
    let ip = class_inner(&z.chi0, &chi)?;
    Ok(ip
        .to_integer()
        .to_u64()
        .expect("multiplicity is a small non-negative integer"))
}

/// `χ_0(id)`, the dimension of the whole zero-weight space.
pub fn zero_weight_dimension(d: usize, w: &Weight) -> Result<BigInt, ZwError> {
    check_len(d, w)?;
    if !w.is_zero_sum() {
        return Ok(BigInt::zero());
    }
    Ok(zero_weight_sd_character(w.as_slice(), d)?.chi0.at_identity())
}

/// SSYT count of shape `f` and content `(s,…,s)`.
pub fn kostka_bound(d: usize, w: &Weight) -> BigInt {
    kostka_count(&w.f(), &vec![w.s(); d])
}

/// Limit on the number of balanced tuples for the dense oracle.
pub const DENSE_LIMIT: u64 = 1_000_000;

/// Rank of `{Σ_ρ sgn(ρ)^s ρ^{⊗n} Y_f e_T}` over all semistandard `T` of
/// content `(s,…,s)`, by fraction-free elimination on the Gram matrix.
pub fn dim_oracle_projection(d: usize, w: &Weight) -> Result<u64, ZwError> {
    check_len(d, w)?;
    if !w.is_zero_sum() {
        return Ok(0);
    }
    let s = w.s();
    let size = balanced_tuple_count(d, s);
    if size > BigInt::from(DENSE_LIMIT) {
        return Err(ZwError::TooLarge(size));
    }
    let f = w.f();
    let vectors = ssyt_enumerate(&f, Some(&vec![s; d]), d as u8)
        .iter()
        .map(|t| projected_vector(t, d, s))
        .collect::<Result<Vec<_>, _>>()?;
    let vectors: Vec<_> = vectors.into_iter().filter(|v| !v.is_zero()).collect();
    let m = vectors.len();
    let mut gram = vec![vec![BigInt::zero(); m]; m];
    for i in 0..m {
        for j in i..m {
            let g = vectors[i].dot(&vectors[j]);
            gram[i][j] = g.clone();
            gram[j][i] = g;
        }
    }
    Ok(bareiss_rank(gram) as u64)
}

/// Rank of an integer matrix by Bareiss fraction-free elimination.
pub fn bareiss_rank(mut a: Vec<Vec<BigInt>>) -> usize {
    let rows = a.len();
    if rows == 0 {
        return 0;
    }
    let cols = a[0].len();
    let mut rank = 0;
    let mut prev = BigInt::one();
    for c in 0..cols {
        let Some(p) = (rank..rows).find(|&r| !a[r][c].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        for r in rank + 1..rows {
            for k in c + 1..cols {
                let v = (&a[rank][c] * &a[r][k] - &a[r][c] * &a[rank][k]) / &prev;
                a[r][k] = v;
            }
            a[r][c] = BigInt::zero();
        }
        prev = a[rank][c].clone();
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

/// One row of the dimension table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DimRow {
    pub w: Weight,
    pub dim: u64,
    /// `|w| / 2`, the grouping used in the table layout.
    pub r: i64,
}

/// `dim Ṽ_w` for every candidate weight with `|w| ≤ max_abs_w`.
pub fn dims_table(d: usize, max_abs_w: i64) -> Result<Vec<DimRow>, ZwError> {
    let weights = enumerate_candidate_weights(d, max_abs_w);
    let mut rows = weights
        .par_iter()
        .map(|w| {
            dim_invariant(d, w).map(|dim| DimRow {
                w: w.clone(),
                dim,
                r: w.norm1() / 2,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    rows.sort_by(|a, b| a.r.cmp(&b.r).then(b.w.cmp(&a.w)));
    Ok(rows)
}

/// Rows with `dim > 0` that break the two-positive/two-negative pattern.
pub fn pattern_violations(rows: &[DimRow]) -> Vec<Weight> {
    rows.iter()
        .filter(|r| r.dim > 0 && !r.w.has_two_by_two_pattern())
        .map(|r| r.w.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(v: &[i64]) -> Weight {
        Weight::new(v.to_vec()).unwrap()
    }

    #[test]
    fn weight_fields() {
        let x = w(&[3, 1, 0, 0, -1, -3]);
        assert_eq!(x.s(), 3);
        assert_eq!(x.f().parts(), &[6, 4, 3, 3, 2]);
        assert_eq!(x.n(), 18);
        assert_eq!(x.norm1(), 8);
        assert_eq!(x.dual(), x);
        assert!(Weight::new(vec![0, 1]).is_err());
    }

    #[test]
    fn candidate_filters() {
        let c = enumerate_candidate_weights(6, 4);
        assert!(c.contains(&w(&[2, 0, 0, 0, 0, -2])));
        assert!(c.iter().all(|x| x.norm1() <= 4 && x.is_zero_sum()));
        let all = all_weights_up_to(6, 4);
        assert!(all.contains(&w(&[1, 0, 0, 0, 0, 0])));
        assert!(all.iter().all(|x| x.norm1() <= 4));
    }

    #[test]
    fn bareiss_examples() {
        let m = |rows: &[&[i64]]| -> Vec<Vec<BigInt>> {
            rows.iter()
                .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
                .collect()
        };
        assert_eq!(bareiss_rank(m(&[&[1, 2], &[2, 4]])), 1);
        assert_eq!(bareiss_rank(m(&[&[0, 1], &[1, 0]])), 2);
        assert_eq!(bareiss_rank(m(&[&[0, 0], &[0, 0]])), 0);
        assert_eq!(bareiss_rank(m(&[&[1, 2, 3], &[4, 5, 6], &[7, 8, 9]])), 2);
    }

    #[test]
    fn small_dims() {
        assert_eq!(dim_invariant(6, &w(&[2, 2, 0, 0, -2, -2])).unwrap(), 1);
        assert_eq!(dim_invariant(6, &w(&[1, 0, 0, 0, 0, -1])).unwrap(), 0);
        assert_eq!(dim_invariant(6, &w(&[1, 0, 0, 0, 0, 0])).unwrap(), 0);
        assert_eq!(dim_oracle_projection(2, &w(&[1, -1])).unwrap(), 0);
        assert_eq!(dim_oracle_projection(2, &w(&[2, -2])).unwrap(), 1);
        let x = w(&[2, 0, -2]);
        assert_eq!(dim_oracle_projection(3, &x).unwrap(), dim_invariant(3, &x).unwrap());
    }
}
