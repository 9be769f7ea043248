//! Fourier and Butson matrices, Hadamard predicates, equivalence search,
//! small MUB constructions and the `h₀` Welch-bound checks.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cyclotomic::CycloInt;
use crate::perm::all_perms;

#[derive(Debug, Error, PartialEq)]
pub enum HadamardError {
    #[error("matrix is not unitary (defect {0:.3e})")]
    NotUnitary(f64),
    #[error("expected {expected} entries, got {got}")]
    BadShape { expected: usize, got: usize },
    #[error("root order must be positive")]
    ZeroOrder,
    #[error("no MUB construction for d = {0}")]
    NoMub(usize),
    #[error("Monte Carlo needs at least 1000 samples, got {0}")]
    TooFewSamples(usize),
}

/// `M_{ab} = ζ_k^{E_{ab}} / √d`, stored by its exponent matrix (row-major).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ButsonMatrix {
    pub d: usize,
    pub k: u32,
    pub exponents: Vec<Vec<u32>>,
}

impl ButsonMatrix {
    pub fn new(d: usize, k: u32, exponents: Vec<Vec<u32>>) -> Result<Self, HadamardError> {
        if k == 0 {
            return Err(HadamardError::ZeroOrder);
        }
        let got = exponents.iter().map(Vec::len).sum::<usize>();
        if exponents.len() != d || exponents.iter().any(|r| r.len() != d) {
            return Err(HadamardError::BadShape { expected: d * d, got });
        }
        let exponents = exponents
            .into_iter()
            .map(|r| r.into_iter().map(|e| e % k).collect())
            .collect();
        Ok(ButsonMatrix { d, k, exponents })
    }

    /// Same matrix over `ζ_{new_k}`; `new_k` must be a multiple of `k`.
    pub fn lift(&self, new_k: u32) -> ButsonMatrix {
        assert_eq!(new_k % self.k, 0, "lift to a non-multiple");
        let f = new_k / self.k;
        ButsonMatrix {
            d: self.d,
            k: new_k,
            exponents: self
                .exponents
                .iter()
                .map(|r| r.iter().map(|e| e * f).collect())
                .collect(),
        }
    }

    pub fn entry(&self, r: usize, c: usize) -> Complex64 {
        Complex64::from_polar(
            1.0 / (self.d as f64).sqrt(),
            2.0 * PI * self.exponents[r][c] as f64 / self.k as f64,
        )
    }

    pub fn to_unitary(&self) -> UnitaryMatrixF {
        let entries = (0..self.d * self.d)
            .map(|i| self.entry(i / self.d, i % self.d))
            .collect();
        UnitaryMatrixF { d: self.d, entries }
    }

    /// `√d^d · det`, exactly, by the Leibniz expansion.
    pub fn det_unnormalized(&self) -> CycloInt {
        let mut counts = vec![BigInt::from(0); self.k as usize];
        for (p, sg) in all_perms(self.d) {
            let e: u64 = (0..self.d).map(|r| self.exponents[r][p[r] as usize] as u64).sum();
            counts[(e % self.k as u64) as usize] += sg as i64;
        }
        CycloInt::from_exponent_counts(self.k, &counts).expect("k ≥ 1")
    }
}

/// `F_d` with `E_{jk} = jk mod d`, indices from zero.
pub fn fourier(d: usize) -> ButsonMatrix {
    let exponents = (0..d).map(|j| (0..d).map(|k| ((j * k) % d) as u32).collect()).collect();
    ButsonMatrix {
        d,
        k: d.max(1) as u32,
        exponents,
    }
}

/// Kronecker product; row index `(i, j) ↦ i·d_b + j`.
pub fn tensor(a: &ButsonMatrix, b: &ButsonMatrix) -> ButsonMatrix {
    let k = a.k.lcm(&b.k);
    let (fa, fb) = (k / a.k, k / b.k);
    let d = a.d * b.d;
    let mut exponents = vec![vec![0u32; d]; d];
    for (r, row) in exponents.iter_mut().enumerate() {
        for (c, e) in row.iter_mut().enumerate() {
            let ea = a.exponents[r / b.d][c / b.d] * fa;
            let eb = b.exponents[r % b.d][c % b.d] * fb;
            *e = (ea + eb) % k;
        }
    }
    ButsonMatrix { d, k, exponents }
}

/// A unitary matrix in double precision, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrixF {
    d: usize,
    entries: Vec<Complex64>,
}

/// `{d, re[], im[]}` on the wire.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnitaryJson {
    pub d: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl UnitaryMatrixF {
    pub const TOL: f64 = 1e-10;

    pub fn new(d: usize, entries: Vec<Complex64>) -> Result<Self, HadamardError> {
        if entries.len() != d * d {
            return Err(HadamardError::BadShape {
                expected: d * d,
                got: entries.len(),
            });
        }
        let u = UnitaryMatrixF { d, entries };
        let defect = u.unitary_defect();
        if defect > Self::TOL {
            return Err(HadamardError::NotUnitary(defect));
        }
        Ok(u)
    }

    pub fn identity(d: usize) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            entries[i * d + i] = Complex64::new(1.0, 0.0);
        }
        UnitaryMatrixF { d, entries }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.entries[r * self.d + c]
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.d, self.d, &self.entries)
    }

    fn from_matrix(m: &DMatrix<Complex64>) -> Self {
        let d = m.nrows();
        let entries = (0..d * d).map(|i| m[(i / d, i % d)]).collect();
        UnitaryMatrixF { d, entries }
    }

    /// `max |U*U − I|`.
    pub fn unitary_defect(&self) -> f64 {
        let m = self.to_matrix();
        let g = m.adjoint() * &m - DMatrix::identity(self.d, self.d);
        g.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `U* V`.
    pub fn adjoint_mul(&self, other: &UnitaryMatrixF) -> UnitaryMatrixF {
        Self::from_matrix(&(self.to_matrix().adjoint() * other.to_matrix()))
    }

    pub fn to_json(&self) -> UnitaryJson {
        UnitaryJson {
            d: self.d,
            re: self.entries.iter().map(|z| z.re).collect(),
            im: self.entries.iter().map(|z| z.im).collect(),
        }
    }

    pub fn from_json(j: &UnitaryJson) -> Result<Self, HadamardError> {
        if j.re.len() != j.im.len() {
            return Err(HadamardError::BadShape {
                expected: j.re.len(),
                got: j.im.len(),
            });
        }
        let entries =
            j.re.iter()
                .zip(&j.im)
                .map(|(&re, &im)| Complex64::new(re, im))
                .collect();
        Self::new(j.d, entries)
    }
}

/// Whether every entry has modulus `1/√d` within `tol`.
pub fn is_hadamard(u: &UnitaryMatrixF, tol: f64) -> bool {
    let target = 1.0 / (u.d as f64).sqrt();
    u.entries.iter().all(|z| (z.norm() - target).abs() <= tol)
}

/// Checks unitarity first; non-unitary input is an error.
pub fn is_hadamard_entries(d: usize, entries: &[Complex64], tol: f64) -> Result<bool, HadamardError> {
    let u = UnitaryMatrixF::new(d, entries.to_vec())?;
    Ok(is_hadamard(&u, tol))
}

/// Closed form `det(F_d) = i^k`, returning `k mod 4`.
pub fn fourier_det_exponent(d: usize) -> u32 {
    let (q, r) = ((d / 4) as u32, d % 4);
    let k = match r {
        0 => 2 * q + 1,
        1 => 2 * q,
        2 => 2 * q + 2,
        _ => 2 * q + 3,
    };
    k % 4
}

pub fn fourier_det_closed_form(d: usize) -> Complex64 {
    Complex64::i().powu(fourier_det_exponent(d))
}

/// `det(F_d)` by LU in double precision.
pub fn fourier_det_numeric(d: usize) -> Complex64 {
    fourier(d).to_unitary().to_matrix().determinant()
}

/// Either representation, for the equivalence search.
#[derive(Debug, Clone, PartialEq)]
pub enum HMatrix {
    Butson(ButsonMatrix),
    Float(UnitaryMatrixF),
}

impl HMatrix {
    pub fn d(&self) -> usize {
        match self {
            HMatrix::Butson(b) => b.d,
            HMatrix::Float(u) => u.d,
        }
    }

    pub fn to_unitary(&self) -> UnitaryMatrixF {
        match self {
            HMatrix::Butson(b) => b.to_unitary(),
            HMatrix::Float(u) => u.clone(),
        }
    }
}

/// Diagonal phases of a witness: exponents over `ζ_k`, or complex numbers.
#[derive(Debug, Clone, PartialEq)]
pub enum Phases {
    Exact { k: u32, rows: Vec<u32>, cols: Vec<u32> },
    Float { rows: Vec<Complex64>, cols: Vec<Complex64> },
}

/// `H₂[r][c] = α_r · H₁[row_perm[r]][col_perm[c]] · β_c`, i.e.
/// `H₂ = P·D·H₁·D′·P′` with `P, P′` the permutations and `D, D′` the phases.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub row_perm: Vec<usize>,
    pub col_perm: Vec<usize>,
    pub phases: Phases,
}

fn inv_perm(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &x) in p.iter().enumerate() {
        inv[x] = i;
    }
    inv
}

impl Witness {
    pub fn identity_exact(d: usize, k: u32) -> Self {
        Witness {
            row_perm: (0..d).collect(),
            col_perm: (0..d).collect(),
            phases: Phases::Exact {
                k,
                rows: vec![0; d],
                cols: vec![0; d],
            },
        }
    }

    fn float_phases(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        match &self.phases {
            Phases::Float { rows, cols } => (rows.clone(), cols.clone()),
            Phases::Exact { k, rows, cols } => {
                let f = |e: &u32| Complex64::from_polar(1.0, 2.0 * PI * *e as f64 / *k as f64);
                (rows.iter().map(f).collect(), cols.iter().map(f).collect())
            }
        }
    }

    /// Applies the witness to a Butson matrix; `None` for float phases or an
    /// incompatible root order.
    pub fn apply_butson(&self, h: &ButsonMatrix) -> Option<ButsonMatrix> {
        let Phases::Exact { k, rows, cols } = &self.phases else {
            return None;
        };
        let l = h.k.lcm(k);
        let h = h.lift(l);
        let f = l / k;
        let d = h.d;
        let exponents = (0..d)
            .map(|r| {
                (0..d)
                    .map(|c| (rows[r] * f + h.exponents[self.row_perm[r]][self.col_perm[c]] + cols[c] * f) % l)
                    .collect()
            })
            .collect();
        Some(ButsonMatrix { d, k: l, exponents })
    }

    pub fn apply_float(&self, h: &UnitaryMatrixF) -> UnitaryMatrixF {
        let (rows, cols) = self.float_phases();
        let d = h.d;
        let entries = (0..d * d)
            .map(|i| {
                let (r, c) = (i / d, i % d);
                rows[r] * h.at(self.row_perm[r], self.col_perm[c]) * cols[c]
            })
            .collect();
        UnitaryMatrixF { d, entries }
    }

    /// The witness carrying `H₂` back to `H₁`.
    pub fn inverse(&self) -> Witness {
        let ri = inv_perm(&self.row_perm);
        let ci = inv_perm(&self.col_perm);
        let phases = match &self.phases {
            Phases::Exact { k, rows, cols } => Phases::Exact {
                k: *k,
                rows: ri.iter().map(|&r| (k - rows[r] % k) % k).collect(),
                cols: ci.iter().map(|&c| (k - cols[c] % k) % k).collect(),
            },
            Phases::Float { rows, cols } => Phases::Float {
                rows: ri.iter().map(|&r| rows[r].inv()).collect(),
                cols: ci.iter().map(|&c| cols[c].inv()).collect(),
            },
        };
        Witness {
            row_perm: ri,
            col_perm: ci,
            phases,
        }
    }

    /// `self` after `first`: `(self ∘ first)(H) = self(first(H))`.
    pub fn after(&self, first: &Witness) -> Witness {
        let row_perm: Vec<usize> = self.row_perm.iter().map(|&r| first.row_perm[r]).collect();
        let col_perm: Vec<usize> = self.col_perm.iter().map(|&c| first.col_perm[c]).collect();
        let phases = match (&self.phases, &first.phases) {
            (
                Phases::Exact {
                    k: k2,
                    rows: r2,
                    cols: c2,
                },
                Phases::Exact {
                    k: k1,
                    rows: r1,
                    cols: c1,
                },
            ) => {
                let l = k1.lcm(k2);
                let (f1, f2) = (l / k1, l / k2);
                Phases::Exact {
                    k: l,
                    rows: (0..r2.len())
                        .map(|r| (r2[r] * f2 + r1[self.row_perm[r]] * f1) % l)
                        .collect(),
                    cols: (0..c2.len())
                        .map(|c| (c2[c] * f2 + c1[self.col_perm[c]] * f1) % l)
                        .collect(),
                }
            }
            _ => {
                let (r2, c2) = self.float_phases();
                let (r1, c1) = first.float_phases();
                Phases::Float {
                    rows: (0..r2.len()).map(|r| r2[r] * r1[self.row_perm[r]]).collect(),
                    cols: (0..c2.len()).map(|c| c2[c] * c1[self.col_perm[c]]).collect(),
                }
            }
        };
        Witness {
            row_perm,
            col_perm,
            phases,
        }
    }

    /// Whether `self(h1) = h2`, exactly when both are Butson and the phases are exact.
    pub fn verifies(&self, h1: &HMatrix, h2: &HMatrix) -> bool {
        if let (HMatrix::Butson(a), HMatrix::Butson(b), Phases::Exact { .. }) = (h1, h2, &self.phases) {
            let Some(img) = self.apply_butson(a) else {
                return false;
            };
            let l = img.k.lcm(&b.k);
            return img.lift(l) == b.lift(l);
        }
        let img = self.apply_float(&h1.to_unitary());
        let b = h2.to_unitary();
        img.entries
            .iter()
            .zip(&b.entries)
            .all(|(x, y)| (x - y).norm() <= FLOAT_TOL)
    }
}

const FLOAT_TOL: f64 = 1e-10;

/// Dephased Butson matrix: first row and column all ones.
pub fn dephase(h: &ButsonMatrix) -> (ButsonMatrix, Witness) {
    dephase_at(h, 0, 0)
}

/// Dephases at pivot `(i, j)`: row `i` and column `j` become all ones,
/// rows and columns keep their positions.
fn dephase_at(h: &ButsonMatrix, i: usize, j: usize) -> (ButsonMatrix, Witness) {
    let k = h.k;
    let e = &h.exponents;
    let rows: Vec<u32> = (0..h.d).map(|r| (k - e[r][j]) % k).collect();
    let cols: Vec<u32> = (0..h.d).map(|c| (e[i][j] + k - e[i][c]) % k).collect();
    let exponents = (0..h.d)
        .map(|r| (0..h.d).map(|c| (e[r][c] + rows[r] + cols[c]) % k).collect())
        .collect();
    let w = Witness {
        row_perm: (0..h.d).collect(),
        col_perm: (0..h.d).collect(),
        phases: Phases::Exact { k, rows, cols },
    };
    (ButsonMatrix { d: h.d, k, exponents }, w)
}

fn dephase_float_at(h: &UnitaryMatrixF, i: usize, j: usize) -> (UnitaryMatrixF, Witness) {
    let d = h.d;
    let unit = |z: Complex64| {
        let n = z.norm();
        if n == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            (z / n).conj()
        }
    };
    let rows: Vec<Complex64> = (0..d).map(|r| unit(h.at(r, j))).collect();
    let cols: Vec<Complex64> = (0..d).map(|c| unit(rows[i] * h.at(i, c))).collect();
    let w = Witness {
        row_perm: (0..d).collect(),
        col_perm: (0..d).collect(),
        phases: Phases::Float { rows, cols },
    };
    (w.apply_float(h), w)
}

pub fn dephase_float(h: &UnitaryMatrixF) -> (UnitaryMatrixF, Witness) {
    dephase_float_at(h, 0, 0)
}

/// Finds `(ρ, π)` with `target[r][c] = k[ρ(r)][π(c)]` and `π(0) = pivot_col`,
/// extending the column map one column at a time and pruning when the
/// multisets of row prefixes disagree.
fn match_permutations<E: Copy>(
    k: &[Vec<E>],
    target: &[Vec<E>],
    pivot_col: usize,
    eq: &impl Fn(E, E) -> bool,
) -> Option<(Vec<usize>, Vec<usize>)> {
    let d = k.len();
    fn rows_match<E: Copy>(
        k: &[Vec<E>],
        target: &[Vec<E>],
        cols: &[usize],
        eq: &impl Fn(E, E) -> bool,
    ) -> Option<Vec<usize>> {
        let d = k.len();
        let mut used = vec![false; d];
        let mut rho = vec![0; d];
        for (r, trow) in target.iter().enumerate() {
            let found = (0..d).find(|&a| !used[a] && cols.iter().enumerate().all(|(c, &kc)| eq(trow[c], k[a][kc])))?;
            used[found] = true;
            rho[r] = found;
        }
        Some(rho)
    }
    fn rec<E: Copy>(
        k: &[Vec<E>],
        target: &[Vec<E>],
        cols: &mut Vec<usize>,
        used: &mut Vec<bool>,
        eq: &impl Fn(E, E) -> bool,
    ) -> Option<(Vec<usize>, Vec<usize>)> {
        let d = k.len();
        let rho = rows_match(k, target, cols, eq)?;
        if cols.len() == d {
            return Some((rho, cols.clone()));
        }
        for c in 0..d {
            if used[c] {
                continue;
            }
            used[c] = true;
            cols.push(c);
            if let Some(found) = rec(k, target, cols, used, eq) {
                return Some(found);
            }
            cols.pop();
            used[c] = false;
        }
        None
    }
    let mut used = vec![false; d];
    used[pivot_col] = true;
    rec(k, target, &mut vec![pivot_col], &mut used, eq)
}

/// Searches for a witness `H₂ = P·D·H₁·D′·P′`. Butson pairs are compared
/// exactly on exponents; anything else in floating point at `1e-10`. The
/// witness is verified by reconstruction before it is returned.
pub fn equivalent(h1: &HMatrix, h2: &HMatrix) -> Option<Witness> {
    if h1.d() != h2.d() {
        return None;
    }
    let d = h1.d();
    let found = match (h1, h2) {
        (HMatrix::Butson(a), HMatrix::Butson(b)) => {
            let l = a.k.lcm(&b.k);
            let (a, b) = (a.lift(l), b.lift(l));
            let (tb, wb) = dephase(&b);
            (0..d * d).find_map(|p| {
                let (i, j) = (p / d, p % d);
                let (ka, wa) = dephase_at(&a, i, j);
                let (rho, pi) = match_permutations(&ka.exponents, &tb.exponents, j, &|x, y| x == y)?;
                let perm = Witness {
                    row_perm: rho,
                    col_perm: pi,
                    phases: Phases::Exact {
                        k: l,
                        rows: vec![0; d],
                        cols: vec![0; d],
                    },
                };
                Some(wb.inverse().after(&perm.after(&wa)))
            })
        }
        _ => {
            let (a, b) = (h1.to_unitary(), h2.to_unitary());
            let (tb, wb) = dephase_float(&b);
            let rows_of = |u: &UnitaryMatrixF| -> Vec<Vec<Complex64>> {
                (0..d).map(|r| (0..d).map(|c| u.at(r, c)).collect()).collect()
            };
            let tgt = rows_of(&tb);
            (0..d * d).find_map(|p| {
                let (i, j) = (p / d, p % d);
                let (ka, wa) = dephase_float_at(&a, i, j);
                let (rho, pi) = match_permutations(&rows_of(&ka), &tgt, j, &|x: Complex64, y: Complex64| {
                    (x - y).norm() <= FLOAT_TOL
                })?;
                let perm = Witness {
                    row_perm: rho,
                    col_perm: pi,
                    phases: Phases::Float {
                        rows: vec![Complex64::new(1.0, 0.0); d],
                        cols: vec![Complex64::new(1.0, 0.0); d],
                    },
                };
                Some(wb.inverse().after(&perm.after(&wa)))
            })
        }
    };
    found.filter(|w| w.verifies(h1, h2))
}

/// `d + 1` mutually unbiased bases as the columns of unitary matrices, for `d ∈ {2,3,4,5}`.
pub fn mub_construction(d: usize) -> Result<Vec<UnitaryMatrixF>, HadamardError> {
    let mut out = vec![UnitaryMatrixF::identity(d)];
    let scale = 1.0 / (d as f64).sqrt();
    match d {
        2 => {
            let i = Complex64::i();
            let one = Complex64::new(1.0, 0.0);
            out.push(UnitaryMatrixF::new(
                2,
                vec![one, one, one, -one].into_iter().map(|z| z * scale).collect(),
            )?);
            out.push(UnitaryMatrixF::new(
                2,
                vec![one, one, i, -i].into_iter().map(|z| z * scale).collect(),
            )?);
        }
        3 | 5 => {
            for a in 0..d {
                let entries = (0..d * d)
                    .map(|idx| {
                        let (j, b) = (idx / d, idx % d);
                        let e = (a * j * j + b * j) % d;
                        Complex64::from_polar(scale, 2.0 * PI * e as f64 / d as f64)
                    })
                    .collect();
                out.push(UnitaryMatrixF::new(d, entries)?);
            }
        }
        4 => {
            // symmetric forms over F_2 with pairwise non-singular differences
            let forms: [[[usize; 2]; 2]; 4] = [[[0, 0], [0, 0]], [[1, 0], [0, 1]], [[0, 1], [1, 1]], [[1, 1], [1, 0]]];
            let bits = |x: usize| [x & 1, (x >> 1) & 1];
            for a in forms {
                let entries = (0..16)
                    .map(|idx| {
                        let (x, b) = (bits(idx / 4), bits(idx % 4));
                        let q: usize = (0..2)
                            .flat_map(|u| (0..2).map(move |v| (u, v)))
                            .map(|(u, v)| x[u] * a[u][v] * x[v])
                            .sum();
                        let lin = x[0] * b[0] + x[1] * b[1];
                        let e = (q + 2 * lin) % 4;
                        Complex64::from_polar(scale, PI * e as f64 / 2.0)
                    })
                    .collect();
                out.push(UnitaryMatrixF::new(4, entries)?);
            }
        }
        _ => return Err(HadamardError::NoMub(d)),
    }
    Ok(out)
}

/// Largest `|⟨v, w⟩|` deviation from `1/√d` over vectors of distinct bases.
pub fn mub_defect(bases: &[UnitaryMatrixF]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..bases.len() {
        for j in 0..bases.len() {
            if i == j {
                continue;
            }
            let g = bases[i].adjoint_mul(&bases[j]);
            let target = 1.0 / (g.d as f64).sqrt();
            for z in &g.entries {
                worst = worst.max((z.norm() - target).abs());
            }
        }
    }
    worst
}

/// Class of one ordered difference `U_i* U_j`.
#[derive(Debug, Clone, Serialize)]
pub struct DifferenceClass {
    pub i: usize,
    pub j: usize,
    pub hadamard: bool,
    /// Name of the first equivalent reference matrix, if any.
    pub class: Option<String>,
}

/// Reference matrices for the class summary: `F_d`, and for composite `d`
/// the tensor products of Fourier matrices over factorizations.
pub fn reference_matrices(d: usize) -> Vec<(String, ButsonMatrix)> {
    let mut out = vec![(format!("F_{d}"), fourier(d))];
    for a in 2..d {
        if d.is_multiple_of(a) && a <= d / a {
            out.push((format!("F_{a}⊗F_{}", d / a), tensor(&fourier(a), &fourier(d / a))));
        }
    }
    out
}

pub fn difference_classes(bases: &[UnitaryMatrixF]) -> Vec<DifferenceClass> {
    let mut out = Vec::new();
    for i in 0..bases.len() {
        for j in 0..bases.len() {
            if i == j {
                continue;
            }
            let g = bases[i].adjoint_mul(&bases[j]);
            let hadamard = is_hadamard(&g, FLOAT_TOL);
            let class = reference_matrices(g.d)
                .into_iter()
                .find(|(_, r)| equivalent(&HMatrix::Butson(r.clone()), &HMatrix::Float(g.clone())).is_some())
                .map(|(name, _)| name);
            out.push(DifferenceClass { i, j, hadamard, class });
        }
    }
    out
}

/// `h₀(U) = Σ |U_ij|⁴ − 1`.
pub fn h0_eval(u: &UnitaryMatrixF) -> f64 {
    u.entries.iter().map(|z| z.norm_sqr().powi(2)).sum::<f64>() - 1.0
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix, with the
/// columns rescaled by the phases of `R`'s diagonal.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> UnitaryMatrixF {
    let sd = std::f64::consts::FRAC_1_SQRT_2;
    let z = DMatrix::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * sd, im * sd)
    });
    let qr = z.qr();
    let (mut q, r) = qr.unpack();
    for c in 0..d {
        let rc = r[(c, c)];
        let ph = if rc.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            rc / rc.norm()
        };
        for row in 0..d {
            q[(row, c)] *= ph;
        }
    }
    UnitaryMatrixF::from_matrix(&q)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub d: usize,
    pub samples: usize,
    pub seed: u64,
    pub mean: f64,
    pub std_err: f64,
    /// `(d−1)/(d+1)`.
    pub target: f64,
}

const MC_SHARDS: usize = 16;

/// Monte Carlo estimate of `∫ h₀ dν` over Haar measure. Shards use seeds
/// drawn from the master seed, so the result does not depend on the thread count.
pub fn h0_haar_integral(d: usize, samples: usize, seed: u64) -> Result<McEstimate, HadamardError> {
    if samples < 1000 {
        return Err(HadamardError::TooFewSamples(samples));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let shard_seeds: Vec<u64> = (0..MC_SHARDS).map(|_| master.next_u64()).collect();
    let sums: Vec<(usize, f64, f64)> = shard_seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let n = samples / MC_SHARDS + usize::from(i < samples % MC_SHARDS);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..n {
                let h = h0_eval(&haar_unitary(d, &mut rng));
                sum += h;
                sq += h * h;
            }
            (n, sum, sq)
        })
        .collect();
    let n = sums.iter().map(|x| x.0).sum::<usize>() as f64;
    let sum: f64 = sums.iter().map(|x| x.1).sum();
    let sq: f64 = sums.iter().map(|x| x.2).sum();
    let mean = sum / n;
    let var = (sq - n * mean * mean) / (n - 1.0);
    Ok(McEstimate {
        d,
        samples,
        seed,
        mean,
        std_err: (var / n).sqrt(),
        target: (d as f64 - 1.0) / (d as f64 + 1.0),
    })
}
