//! Young tableaux, row and column groups, Young symmetrizers on sparse integer
//! tensors, and the search for a tableau whose symmetrized vector survives the
//! signed `S_d` projection.
//!
//! Tableau entries are the symbols `1..=d`; tensor indices are the same symbols
//! shifted to `0..d`. Cells are read across rows, so a filling `T` corresponds
//! to the basis tensor `e_T = e_{T(c_1)} ⊗ ⋯ ⊗ e_{T(c_n)}`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rustc_hash::FxHashMap;
use serde::Serialize;
use thiserror::Error;

use crate::perm::{all_perms, arrangement_sign};
use crate::symchar::{factorial, Partition};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableauError {
    #[error("row lengths {0:?} do not form a partition")]
    BadShape(Vec<usize>),
    #[error("tableau shape {found} does not match {expected}")]
    ShapeMismatch { expected: Partition, found: Partition },
    #[error("entry {entry} outside 1..={d}")]
    EntryOutOfRange { entry: u8, d: usize },
    #[error("tensor index {0:?} has the wrong length or an out-of-range symbol")]
    BadIndex(Vec<u8>),
    #[error("weight {0:?} does not sum to zero")]
    NonZeroSum(Vec<i64>),
    #[error("tensor too large to materialize: {0} terms")]
    TooLarge(u128),
}

/// A filling of a Young diagram by symbols `1..=d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Tableau {
    rows: Vec<Vec<u8>>,
}

impl Tableau {
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self, TableauError> {
        let lens: Vec<usize> = rows.iter().map(Vec::len).collect();
        if lens.contains(&0) || lens.windows(2).any(|w| w[0] < w[1]) {
            return Err(TableauError::BadShape(lens));
        }
        Ok(Tableau { rows })
    }

    /// The filling `1, 2, …, n` laid consecutively across the rows.
    pub fn consecutive(shape: &Partition) -> Self {
        let mut next = 0u8;
        let rows = shape
            .parts()
            .iter()
            .map(|&len| {
                (0..len)
                    .map(|_| {
                        next += 1;
                        next
                    })
                    .collect()
            })
            .collect();
        Tableau { rows }
    }

    pub fn shape(&self) -> Partition {
        Partition::from_unsorted(self.rows.iter().map(|r| r.len() as u32).collect())
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn columns(&self) -> Vec<Vec<u8>> {
        let width = self.rows.first().map_or(0, Vec::len);
        (0..width)
            .map(|j| self.rows.iter().take_while(|r| r.len() > j).map(|r| r[j]).collect())
            .collect()
    }

    /// Entries read across the rows.
    pub fn reading_word(&self) -> Vec<u8> {
        self.rows.iter().flatten().copied().collect()
    }

    /// Number of occurrences of each symbol `1..=d`.
    pub fn content(&self, d: usize) -> Vec<u32> {
        let mut c = vec![0u32; d];
        for &x in self.rows.iter().flatten() {
            if (1..=d).contains(&(x as usize)) {
                c[x as usize - 1] += 1;
            }
        }
        c
    }

    /// Rows weakly increase and columns strictly increase.
    pub fn is_semistandard(&self) -> bool {
        let rows_ok = self.rows.iter().all(|r| r.windows(2).all(|w| w[0] <= w[1]));
        let cols_ok = self.columns().iter().all(|c| c.windows(2).all(|w| w[0] < w[1]));
        rows_ok && cols_ok
    }

    fn has_repeat_in_column(&self) -> bool {
        self.columns().iter().any(|c| {
            let mut seen = [false; 256];
            c.iter().any(|&x| std::mem::replace(&mut seen[x as usize], true))
        })
    }

    /// Tensor index (symbols shifted to start at 0) read across the rows.
    pub fn tensor_index(&self) -> Vec<u8> {
        self.reading_word().iter().map(|&x| x - 1).collect()
    }
}

impl fmt::Display for Tableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "))
            .collect();
        write!(f, "[{}]", rows.join(" / "))
    }
}

/// Semistandard tableaux of `shape` with entries in `1..=max_entry`,
/// restricted to the given content when one is supplied.
///
/// Cells are filled across the rows with the smallest admissible symbol
/// first, so the output is sorted by reading word.
pub fn ssyt_enumerate(shape: &Partition, content: Option<&[u32]>, max_entry: u8) -> Vec<Tableau> {
    let parts: Vec<usize> = shape.parts().iter().map(|&p| p as usize).collect();
    if let Some(c) = content {
        if c.len() > max_entry as usize || c.iter().sum::<u32>() != shape.n() {
            return Vec::new();
        }
    }
    let mut remaining: Vec<u32> = match content {
        Some(c) => {
            let mut r = c.to_vec();
            r.resize(max_entry as usize, 0);
            r
        }
        None => vec![u32::MAX; max_entry as usize],
    };
    let mut rows: Vec<Vec<u8>> = parts.iter().map(|&l| vec![0u8; l]).collect();
    let mut out = Vec::new();
    fn rec(
        parts: &[usize],
        cell: (usize, usize),
        rows: &mut Vec<Vec<u8>>,
        remaining: &mut [u32],
        max_entry: u8,
        out: &mut Vec<Tableau>,
    ) {
        let (i, j) = cell;
        if i == parts.len() {
            out.push(Tableau { rows: rows.clone() });
            return;
        }
        let next = if j + 1 == parts[i] { (i + 1, 0) } else { (i, j + 1) };
        let lo_left = if j > 0 { rows[i][j - 1] } else { 1 };
        let lo_above = if i > 0 { rows[i - 1][j] + 1 } else { 1 };
        let lo = lo_left.max(lo_above);
        // leave room for the strictly larger cells further down this column
        let hi = max_entry.saturating_sub((parts.iter().skip(i + 1).filter(|&&l| l > j).count()) as u8);
        for v in lo..=hi {
            let slot = &mut remaining[v as usize - 1];
            if *slot == 0 {
                continue;
            }
            *slot -= 1;
            rows[i][j] = v;
            rec(parts, next, rows, remaining, max_entry, out);
            remaining[v as usize - 1] += 1;
        }
        rows[i][j] = 0;
    }
    if parts.is_empty() {
        return vec![Tableau { rows: vec![] }];
    }
    rec(&parts, (0, 0), &mut rows, &mut remaining, max_entry, &mut out);
    out
}

/// Row and column group data for a shape, together with the coset
/// representatives attached to a particular filling `T`.
#[derive(Debug, Clone)]
pub struct TableauGroups {
    pub shape: Partition,
    /// The filling `1, …, n` across the rows, naming the cells.
    pub t0: Tableau,
    pub row_order: BigInt,
    pub col_order: BigInt,
    /// Order of the subgroup of `R` fixing the filling `T`.
    pub row_stab_order: BigInt,
    /// The distinct fillings `σ(T)`, one per coset of the row stabilizer.
    pub r1: Vec<Tableau>,
    /// The members of `r1` with no repeated symbol in any column.
    pub r2: Vec<Tableau>,
}

impl TableauGroups {
    /// Row-group elements as cell permutations on `t0`, with `|R|` entries.
    pub fn row_group(&self) -> Vec<Vec<u8>> {
        block_group(&cell_blocks_rows(&self.shape))
            .into_iter()
            .map(|(p, _)| p)
            .collect()
    }

    /// Column-group elements as cell permutations on `t0`, with their signs.
    pub fn column_group(&self) -> Vec<(Vec<u8>, i8)> {
        block_group(&cell_blocks_cols(&self.shape))
    }
}

fn cell_blocks_rows(shape: &Partition) -> Vec<Vec<usize>> {
    let mut start = 0;
    shape
        .parts()
        .iter()
        .map(|&len| {
            let b = (start..start + len as usize).collect();
            start += len as usize;
            b
        })
        .collect()
}

fn cell_blocks_cols(shape: &Partition) -> Vec<Vec<usize>> {
    let rows = cell_blocks_rows(shape);
    let width = shape.parts().first().copied().unwrap_or(0) as usize;
    (0..width)
        .map(|j| rows.iter().filter(|r| r.len() > j).map(|r| r[j]).collect())
        .collect()
}

// Direct product of the symmetric groups on each block of cells.
fn block_group(blocks: &[Vec<usize>]) -> Vec<(Vec<u8>, i8)> {
    let n: usize = blocks.iter().map(Vec::len).sum();
    let mut out = vec![((0..n as u8).collect::<Vec<u8>>(), 1i8)];
    for block in blocks {
        let local = all_perms(block.len());
        let mut next = Vec::with_capacity(out.len() * local.len());
        for (p, sg) in &out {
            for (q, sq) in &local {
                let mut r = p.clone();
                for (k, &cell) in block.iter().enumerate() {
                    r[cell] = block[q[k] as usize] as u8;
                }
                next.push((r, sg * sq));
            }
        }
        out = next;
    }
    out
}

/// Moves the content of cell `c` to cell `p[c]`.
fn act_on_cells(p: &[u8], word: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; word.len()];
    for (c, &x) in word.iter().enumerate() {
        out[p[c] as usize] = x;
    }
    out
}

/// Groups attached to `shape` and the filling `t`.
pub fn default_tableau_and_groups(shape: &Partition, t: &Tableau) -> Result<TableauGroups, TableauError> {
    let found = t.shape();
    if &found != shape {
        return Err(TableauError::ShapeMismatch {
            expected: shape.clone(),
            found,
        });
    }
    let row_order = shape.parts().iter().fold(BigInt::one(), |acc, &l| acc * factorial(l));
    let col_order = shape
        .conjugate()
        .parts()
        .iter()
        .fold(BigInt::one(), |acc, &l| acc * factorial(l));
    let mut row_stab_order = BigInt::one();
    for row in t.rows() {
        let mut counts: BTreeMap<u8, u32> = BTreeMap::new();
        for &x in row {
            *counts.entry(x).or_default() += 1;
        }
        for &m in counts.values() {
            row_stab_order *= factorial(m);
        }
    }
    // distinct rearrangements of each row, combined row by row
    let mut r1: Vec<Vec<Vec<u8>>> = vec![vec![]];
    for row in t.rows() {
        let mut sorted = row.clone();
        sorted.sort_unstable();
        let mut arrangements = Vec::new();
        loop {
            arrangements.push(sorted.clone());
            if !crate::perm::next_permutation(&mut sorted) {
                break;
            }
        }
        let mut next = Vec::with_capacity(r1.len() * arrangements.len());
        for prefix in &r1 {
            for a in &arrangements {
                let mut p = prefix.clone();
                p.push(a.clone());
                next.push(p);
            }
        }
        r1 = next;
    }
    let r1: Vec<Tableau> = r1.into_iter().map(|rows| Tableau { rows }).collect();
    let r2 = r1.iter().filter(|x| !x.has_repeat_in_column()).cloned().collect();
    Ok(TableauGroups {
        shape: shape.clone(),
        t0: Tableau::consecutive(shape),
        row_order,
        col_order,
        row_stab_order,
        r1,
        r2,
    })
}

/// An integer vector in `(C^d)^{⊗n}` stored by its non-zero coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseTensor {
    d: usize,
    n: usize,
    terms: BTreeMap<Vec<u8>, BigInt>,
}

impl SparseTensor {
    pub fn new(d: usize, n: usize) -> Self {
        SparseTensor {
            d,
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u8>, BigInt> {
        &self.terms
    }

    pub fn nnz(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, idx: &[u8]) -> BigInt {
        self.terms.get(idx).cloned().unwrap_or_default()
    }

    pub fn add_term(&mut self, idx: Vec<u8>, coeff: BigInt) -> Result<(), TableauError> {
        if idx.len() != self.n || idx.iter().any(|&x| x as usize >= self.d) {
            return Err(TableauError::BadIndex(idx));
        }
        if coeff.is_zero() {
            return Ok(());
        }
        let entry = self.terms.entry(idx);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += coeff;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
        Ok(())
    }

    pub fn dot(&self, other: &SparseTensor) -> BigInt {
        let (small, large) = if self.nnz() <= other.nnz() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .terms
            .iter()
            .filter_map(|(k, v)| large.terms.get(k).map(|w| v * w))
            .sum()
    }

    pub fn norm_sq(&self) -> BigInt {
        self.terms.values().map(|v| v * v).sum()
    }

    pub fn gcd(&self) -> BigInt {
        self.terms.values().fold(BigInt::zero(), |acc, v| acc.gcd(v))
    }

    /// Divides by the gcd of the coefficients (sign chosen so the first term
    /// is positive) and returns the divisor.
    pub fn normalize(&mut self) -> BigInt {
        let mut g = self.gcd();
        if g.is_zero() {
            return BigInt::one();
        }
        if self.terms.values().next().is_some_and(|v| v.is_negative()) {
            g = -g;
        }
        for v in self.terms.values_mut() {
            *v = &*v / &g;
        }
        g
    }

    /// Applies `ρ^{⊗n}` for a permutation `ρ` of the symbols.
    pub fn permute_symbols(&self, rho: &[u8]) -> SparseTensor {
        let terms = self
            .terms
            .iter()
            .map(|(k, v)| (k.iter().map(|&x| rho[x as usize]).collect(), v.clone()))
            .collect();
        SparseTensor {
            d: self.d,
            n: self.n,
            terms,
        }
    }

    /// Moves the tensor factor at position `t` to position `p[t]`.
    pub fn permute_positions(&self, p: &[u8]) -> SparseTensor {
        let terms = self
            .terms
            .iter()
            .map(|(k, v)| (act_on_cells(p, k), v.clone()))
            .collect();
        SparseTensor {
            d: self.d,
            n: self.n,
            terms,
        }
    }

    pub fn scale(&self, k: &BigInt) -> SparseTensor {
        let mut out = SparseTensor::new(self.d, self.n);
        if k.is_zero() {
            return out;
        }
        out.terms = self.terms.iter().map(|(i, v)| (i.clone(), v * k)).collect();
        out
    }

    fn from_packed(d: usize, n: usize, map: FxHashMap<u64, i64>) -> SparseTensor {
        let terms = map
            .into_iter()
            .filter(|(_, v)| *v != 0)
            .map(|(k, v)| (unpack(k, n), BigInt::from(v)))
            .collect();
        SparseTensor { d, n, terms }
    }
}

fn pack(idx: &[u8]) -> u64 {
    idx.iter().fold(0u64, |acc, &x| (acc << 4) | x as u64)
}

fn unpack(mut key: u64, n: usize) -> Vec<u8> {
    let mut out = vec![0u8; n];
    for slot in out.iter_mut().rev() {
        *slot = (key & 0xf) as u8;
        key >>= 4;
    }
    out
}

/// `Y_f e_T = Σ_{σ∈R} Σ_{τ∈C} sgn(τ) e_{τσ(T)}` with `f` the shape of `T`.
pub fn young_symmetrizer_apply(shape: &Partition, t: &Tableau, d: usize) -> Result<SparseTensor, TableauError> {
    let groups = default_tableau_and_groups(shape, t)?;
    if let Some(&bad) = t.reading_word().iter().find(|&&x| x == 0 || x as usize > d) {
        return Err(TableauError::EntryOutOfRange { entry: bad, d });
    }
    let n = t.n();
    let cols = groups.column_group();
    let stab = i64::try_from(&groups.row_stab_order).map_err(|_| TableauError::TooLarge(0))?;
    let mut acc: FxHashMap<u64, i64> = FxHashMap::default();
    for filled in &groups.r2 {
        let word = filled.tensor_index();
        for (tau, sg) in &cols {
            *acc.entry(pack(&act_on_cells(tau, &word))).or_default() += stab * *sg as i64;
        }
    }
    Ok(SparseTensor::from_packed(d, n, acc))
}

/// Applies the full symmetrizer `Y_f = Σ_σ Σ_τ sgn(τ) F_{τσ}` to an arbitrary tensor.
pub fn young_symmetrizer_apply_tensor(shape: &Partition, x: &SparseTensor) -> SparseTensor {
    let t0 = Tableau::consecutive(shape);
    let groups = default_tableau_and_groups(shape, &t0).expect("consecutive filling fits");
    let rows = groups.row_group();
    let cols = groups.column_group();
    let mut out = SparseTensor::new(x.d, x.n);
    for sigma in &rows {
        let xs = x.permute_positions(sigma);
        for (tau, sg) in &cols {
            for (k, v) in xs.permute_positions(tau).terms {
                out.add_term(k, v * BigInt::from(*sg)).expect("same shape");
            }
        }
    }
    out
}

/// `Σ_{ρ∈S_d} sgn(ρ)^s ρ^{⊗n} x`, which is `d!` times the signed projection.
pub fn project_sd(x: &SparseTensor, s: u32) -> SparseTensor {
    let d = x.d;
    let n = x.n;
    let small: Option<FxHashMap<u64, i64>> = (|| {
        let mut acc: FxHashMap<u64, i64> = FxHashMap::default();
        let coeffs: Vec<(Vec<u8>, i64)> = x
            .terms
            .iter()
            .map(|(k, v)| i64::try_from(v).ok().map(|v| (k.clone(), v)))
            .collect::<Option<_>>()?;
        if n > 16 || d > 16 {
            return None;
        }
        for (rho, sg) in all_perms(d) {
            let w = if s % 2 == 1 { sg as i64 } else { 1 };
            for (k, v) in &coeffs {
                let img: Vec<u8> = k.iter().map(|&a| rho[a as usize]).collect();
                *acc.entry(pack(&img)).or_default() += w * v;
            }
        }
        Some(acc)
    })();
    if let Some(acc) = small {
        return SparseTensor::from_packed(d, n, acc);
    }
    let mut out = SparseTensor::new(d, n);
    for (rho, sg) in all_perms(d) {
        let w = BigInt::from(if s % 2 == 1 { sg as i64 } else { 1 });
        for (k, v) in x.permute_symbols(&rho).terms {
            out.add_term(k, v * &w).expect("same shape");
        }
    }
    out
}

/// The projected vector `v = Σ_ρ sgn(ρ)^s ρ^{⊗n} Y_f e_T` for a filling of content `(s,…,s)`.
pub fn projected_vector(t: &Tableau, d: usize, s: u32) -> Result<SparseTensor, TableauError> {
    let y = young_symmetrizer_apply(&t.shape(), t, d)?;
    Ok(project_sd(&y, s))
}

/// Number of index tuples in `[d]^n` using each symbol exactly `s` times.
pub fn balanced_tuple_count(d: usize, s: u32) -> BigInt {
    factorial(d as u32 * s) / num_traits::pow(factorial(s), d)
}

/// Result of the invariant-vector search.
#[derive(Debug, Clone)]
pub struct InvariantVector {
    pub tableau: Tableau,
    /// The projection with coefficients divided by their gcd; absent when
    /// the tensor was not materialized.
    pub vector: Option<SparseTensor>,
    /// The gcd removed from `Σ_ρ sgn(ρ)^s ρ^{⊗n} Y_f e_T`.
    pub scale: Option<BigInt>,
}

/// Largest `d·s` for which the invariant vector is materialized.
pub const MATERIALIZE_MAX_N: usize = 12;

/// Weight data `(s, f)` for `w` weakly decreasing with zero sum.
pub fn shape_of_weight(w: &[i64]) -> Result<(u32, Partition), TableauError> {
    if w.iter().sum::<i64>() != 0 || w.windows(2).any(|p| p[0] < p[1]) {
        return Err(TableauError::NonZeroSum(w.to_vec()));
    }
    let s = w.last().map_or(0, |&x| -x) as u32;
    let f = Partition::from_unsorted(w.iter().map(|&x| (x + s as i64) as u32).collect());
    Ok((s, f))
}

/// Finds the first semistandard `T` of shape `f` and content `(s,…,s)` whose
/// signed `S_d` projection of `Y_f e_T` is non-zero.
///
/// For `d·s ≤ 12` the vector is materialized and normalized; beyond that the
/// non-vanishing test uses the reduced identity form.
pub fn invariant_vector(d: usize, w: &[i64]) -> Result<Option<InvariantVector>, TableauError> {
    let (s, f) = shape_of_weight(w)?;
    let content = vec![s; d];
    for t in ssyt_enumerate(&f, Some(&content), d as u8) {
        if d * s as usize <= MATERIALIZE_MAX_N {
            let mut v = projected_vector(&t, d, s)?;
            if v.is_zero() {
                continue;
            }
            let g = v.normalize();
            return Ok(Some(InvariantVector {
                tableau: t,
                vector: Some(v),
                scale: Some(g),
            }));
        }
        if !crate::certify::identity_form(d, s, &t).is_zero() {
            return Ok(Some(InvariantVector {
                tableau: t,
                vector: None,
                scale: None,
            }));
        }
    }
    Ok(None)
}

/// Dense rank helpers use this map from tuples to coordinates.
pub fn balanced_tuples(d: usize, s: u32) -> HashMap<Vec<u8>, usize> {
    let mut base: Vec<u8> = (0..d as u8).flat_map(|x| std::iter::repeat_n(x, s as usize)).collect();
    let mut out = HashMap::new();
    loop {
        let k = out.len();
        out.insert(base.clone(), k);
        if !crate::perm::next_permutation(&mut base) {
            break;
        }
    }
    out
}

/// Sign of the column rearrangement carrying `a` onto `b` column by column,
/// or zero when some column of `a` is not a rearrangement of the same column of `b`.
pub fn column_match_sign(a: &Tableau, b: &Tableau) -> i8 {
    let mut sg = 1i8;
    for (ca, cb) in a.columns().iter().zip(b.columns().iter()) {
        match arrangement_sign(ca, cb) {
            Some(x) => sg *= x,
            None => return 0,
        }
    }
    sg
}
