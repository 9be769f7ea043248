//! Exact arithmetic in the ring of cyclotomic integers `Z[ζ_N]`.
//!
//! Elements are stored in the power basis `1, ζ, …, ζ^{φ(N)-1}` after
//! reduction modulo the `N`-th cyclotomic polynomial. Since `Φ_N` is monic
//! with integer coefficients the reduction never introduces denominators, and
//! two elements are equal exactly when their coefficient vectors agree.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock, RwLock};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CycloError {
    #[error("cyclotomic order must be positive")]
    ZeroOrder,
    #[error("cyclotomic orders differ: {0} vs {1}")]
    OrderMismatch(u32, u32),
    #[error("expected {expected} coefficients for order {order}, found {found}")]
    BadLength { order: u32, expected: usize, found: usize },
    #[error("invalid integer literal {0:?}")]
    BadInteger(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

/// Precomputed data for one order `N`.
#[derive(Debug)]
struct RingData {
    /// Coefficients of `Φ_N`, lowest degree first; monic of degree `phi`.
    phi_poly: Vec<i64>,
    /// `x^k mod Φ_N` for `k in 0..N`.
    powers: Vec<Vec<i64>>,
}

impl RingData {
    fn phi(&self) -> usize {
        self.phi_poly.len() - 1
    }
}

fn poly_div_exact(num: &[i64], den: &[i64]) -> Vec<i64> {
    // den is monic
    let mut rem = num.to_vec();
    let dd = den.len() - 1;
    if rem.len() <= dd {
        return vec![0];
    }
    let mut quot = vec![0i64; rem.len() - dd];
    for i in (0..quot.len()).rev() {
        let c = rem[i + dd];
        quot[i] = c;
        if c != 0 {
            for (j, &dj) in den.iter().enumerate() {
                rem[i + j] -= c * dj;
            }
        }
    }
    debug_assert!(rem.iter().all(|&c| c == 0));
    quot
}

fn cyclotomic_poly(n: u32, cache: &mut HashMap<u32, Vec<i64>>) -> Vec<i64> {
    if let Some(p) = cache.get(&n) {
        return p.clone();
    }
    // x^n - 1
    let mut num = vec![0i64; n as usize + 1];
    num[0] = -1;
    num[n as usize] = 1;
    for k in 1..n {
        if n.is_multiple_of(k) {
            let pk = cyclotomic_poly(k, cache);
            num = poly_div_exact(&num, &pk);
        }
    }
    cache.insert(n, num.clone());
    num
}

fn build_ring(order: u32) -> RingData {
    let mut cache = HashMap::new();
    let phi_poly = cyclotomic_poly(order, &mut cache);
    let phi = phi_poly.len() - 1;
    let mut powers = Vec::with_capacity(order as usize);
    let mut cur = vec![0i64; phi];
    cur[0] = 1;
    if phi == 0 {
        // unreachable: phi(N) >= 1 for N >= 1
        cur = vec![];
    }
    for _ in 0..order {
        powers.push(cur.clone());
        // multiply by x and reduce
        let top = cur[phi - 1];
        let mut next = vec![0i64; phi];
        next[1..phi].copy_from_slice(&cur[..(phi - 1)]);
        if top != 0 {
            for j in 0..phi {
                next[j] -= top * phi_poly[j];
            }
        }
        cur = next;
    }
    RingData { phi_poly, powers }
}

fn ring(order: u32) -> Arc<RingData> {
    static RINGS: OnceLock<RwLock<HashMap<u32, Arc<RingData>>>> = OnceLock::new();
    let rings = RINGS.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(r) = rings.read().expect("ring cache poisoned").get(&order) {
        return r.clone();
    }
    let built = Arc::new(build_ring(order));
    rings
        .write()
        .expect("ring cache poisoned")
        .entry(order)
        .or_insert(built)
        .clone()
}

/// Euler's totient, as the degree of `Φ_N`.
pub fn totient(order: u32) -> Result<usize, CycloError> {
    if order == 0 {
        return Err(CycloError::ZeroOrder);
    }
    Ok(ring(order).phi())
}

/// The cyclotomic polynomial `Φ_N`, lowest degree coefficient first.
pub fn cyclotomic_polynomial(order: u32) -> Result<Vec<i64>, CycloError> {
    if order == 0 {
        return Err(CycloError::ZeroOrder);
    }
    Ok(ring(order).phi_poly.clone())
}

/// An element of `Z[ζ_N]` in canonical power-basis form.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CycloInt {
    order: u32,
    coeffs: Vec<BigInt>,
}

impl CycloInt {
    pub fn zero(order: u32) -> Result<Self, CycloError> {
        let phi = totient(order)?;
        Ok(CycloInt {
            order,
            coeffs: vec![BigInt::zero(); phi],
        })
    }

    pub fn from_int(order: u32, value: impl Into<BigInt>) -> Result<Self, CycloError> {
        let mut z = Self::zero(order)?;
        z.coeffs[0] = value.into();
        Ok(z)
    }

    pub fn one(order: u32) -> Result<Self, CycloError> {
        Self::from_int(order, 1)
    }

    /// `ζ_N^{k mod N}`.
    pub fn zeta_pow(order: u32, k: i64) -> Result<Self, CycloError> {
        if order == 0 {
            return Err(CycloError::ZeroOrder);
        }
        let r = ring(order);
        let e = k.rem_euclid(order as i64) as usize;
        Ok(CycloInt {
            order,
            coeffs: r.powers[e].iter().map(|&c| BigInt::from(c)).collect(),
        })
    }

    /// `Σ_k counts[k] ζ^k` for `k in 0..counts.len()`; exponents wrap mod `N`.
    pub fn from_exponent_counts<T>(order: u32, counts: &[T]) -> Result<Self, CycloError>
    where
        T: Clone + Into<BigInt>,
    {
        if order == 0 {
            return Err(CycloError::ZeroOrder);
        }
        let r = ring(order);
        let mut folded = vec![BigInt::zero(); order as usize];
        for (k, c) in counts.iter().enumerate() {
            folded[k % order as usize] += c.clone().into();
        }
        let mut coeffs = vec![BigInt::zero(); r.phi()];
        for (k, c) in folded.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for (j, &p) in r.powers[k].iter().enumerate() {
                if p != 0 {
                    coeffs[j] += c * p;
                }
            }
        }
        Ok(CycloInt { order, coeffs })
    }

    /// Builds from an arbitrary-length polynomial in `ζ`, reducing it.
    pub fn from_poly(order: u32, poly: &[BigInt]) -> Result<Self, CycloError> {
        Self::from_exponent_counts(order, poly)
    }

    /// Builds from already-canonical coefficients.
    pub fn from_coeffs(order: u32, coeffs: Vec<BigInt>) -> Result<Self, CycloError> {
        let phi = totient(order)?;
        if coeffs.len() != phi {
            return Err(CycloError::BadLength {
                order,
                expected: phi,
                found: coeffs.len(),
            });
        }
        Ok(CycloInt { order, coeffs })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    fn check(&self, other: &Self) -> Result<(), CycloError> {
        if self.order != other.order {
            Err(CycloError::OrderMismatch(self.order, other.order))
        } else {
            Ok(())
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, CycloError> {
        self.check(other)?;
        Ok(CycloInt {
            order: self.order,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, CycloError> {
        self.check(other)?;
        Ok(CycloInt {
            order: self.order,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, CycloError> {
        self.check(other)?;
        let phi = self.coeffs.len();
        let mut prod = vec![BigInt::zero(); 2 * phi];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if !b.is_zero() {
                    prod[i + j] += a * b;
                }
            }
        }
        Self::from_exponent_counts(self.order, &prod)
    }

    /// The same element viewed in `Z[ζ_M]` for a multiple `M` of the order.
    pub fn lift(&self, new_order: u32) -> Result<Self, CycloError> {
        if new_order == 0 || !new_order.is_multiple_of(self.order) {
            return Err(CycloError::OrderMismatch(self.order, new_order));
        }
        let step = (new_order / self.order) as usize;
        let mut poly = vec![BigInt::zero(); new_order as usize];
        for (k, c) in self.coeffs.iter().enumerate() {
            poly[k * step] += c;
        }
        Self::from_exponent_counts(new_order, &poly)
    }

    pub fn arith(a: &Self, b: &Self, op: ArithOp) -> Result<Self, CycloError> {
        match op {
            ArithOp::Add => a.checked_add(b),
            ArithOp::Sub => a.checked_sub(b),
            ArithOp::Mul => a.checked_mul(b),
        }
    }

    pub fn scale(&self, k: &BigInt) -> Self {
        CycloInt {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }

    /// Complex conjugation, `ζ ↦ ζ^{-1}`.
    pub fn conj(&self) -> Self {
        let n = self.order as usize;
        let mut poly = vec![BigInt::zero(); n];
        for (k, c) in self.coeffs.iter().enumerate() {
            poly[(n - k) % n] += c;
        }
        Self::from_exponent_counts(self.order, &poly).expect("order already validated")
    }

    /// The integer value if the canonical form is a constant.
    ///
    /// For `N = 6` (and any `N` whose real subring is `Z`) this is exactly the
    /// test for being real; for other orders it only answers whether the
    /// canonical form is constant.
    pub fn as_rational_integer(&self) -> Option<BigInt> {
        if self.coeffs[1..].iter().all(Zero::is_zero) {
            Some(self.coeffs[0].clone())
        } else {
            None
        }
    }

    /// Numerical value under `ζ_N ↦ exp(2πi/N)`.
    pub fn embed_float(&self) -> Complex64 {
        let n = self.order as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let v = c.to_f64().unwrap_or(f64::NAN);
            let theta = 2.0 * std::f64::consts::PI * (k as f64) / n;
            acc += Complex64::from_polar(v, theta);
        }
        acc
    }
}

impl fmt::Debug for CycloInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CycloInt({}; {})", self.order, self)
    }
}

impl fmt::Display for CycloInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}·ζ")?,
                _ => write!(f, "{c}·ζ^{k}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident, $checked:ident) => {
        impl $tr<&CycloInt> for &CycloInt {
            type Output = CycloInt;
            /// Panics when the orders differ; use the `checked_*` form to get an error instead.
            fn $method(self, rhs: &CycloInt) -> CycloInt {
                self.$checked(rhs).expect("cyclotomic order mismatch")
            }
        }
        impl $tr<CycloInt> for CycloInt {
            type Output = CycloInt;
            fn $method(self, rhs: CycloInt) -> CycloInt {
                (&self).$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, checked_add);
forward_binop!(Sub, sub, checked_sub);
forward_binop!(Mul, mul, checked_mul);

impl Neg for &CycloInt {
    type Output = CycloInt;
    fn neg(self) -> CycloInt {
        CycloInt {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

impl Neg for CycloInt {
    type Output = CycloInt;
    fn neg(self) -> CycloInt {
        -&self
    }
}

#[derive(Serialize, Deserialize)]
struct CycloRecord {
    order: u32,
    coeffs: Vec<String>,
}

impl Serialize for CycloInt {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        CycloRecord {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c.to_string()).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CycloInt {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rec = CycloRecord::deserialize(deserializer)?;
        let coeffs = rec
            .coeffs
            .iter()
            .map(|s| s.parse::<BigInt>().map_err(|_| CycloError::BadInteger(s.clone())))
            .collect::<Result<Vec<_>, _>>()
            .map_err(serde::de::Error::custom)?;
        CycloInt::from_coeffs(rec.order, coeffs).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn z6(k: i64) -> CycloInt {
        CycloInt::zeta_pow(6, k).unwrap()
    }

    #[test]
    fn phi_polynomials() {
        assert_eq!(cyclotomic_polynomial(1).unwrap(), vec![-1, 1]);
        assert_eq!(cyclotomic_polynomial(4).unwrap(), vec![1, 0, 1]);
        assert_eq!(cyclotomic_polynomial(6).unwrap(), vec![1, -1, 1]);
        assert_eq!(totient(12).unwrap(), 4);
        assert_eq!(totient(1).unwrap(), 1);
    }

    #[test]
    fn zeta_basics() {
        assert_eq!(z6(0), CycloInt::one(6).unwrap());
        assert_eq!(z6(3), CycloInt::from_int(6, -1).unwrap());
        assert_eq!(z6(7), z6(1));
        assert_eq!(z6(-5), z6(1));
        assert_eq!(CycloInt::zeta_pow(0, 1), Err(CycloError::ZeroOrder));
    }

    #[test]
    fn conjugate_pair_and_full_sum() {
        assert_eq!(&z6(1) + &z6(5), CycloInt::one(6).unwrap());
        let total = (0..6).fold(CycloInt::zero(6).unwrap(), |acc, k| acc + z6(k));
        assert!(total.is_zero());
        assert_eq!(z6(1).conj(), z6(5));
    }

    #[test]
    fn rational_integer_detection() {
        assert_eq!(
            CycloInt::from_int(6, 3).unwrap().as_rational_integer(),
            Some(BigInt::from(3))
        );
        assert_eq!((&z6(1) + &z6(1).conj()).as_rational_integer(), Some(BigInt::from(1)));
        // 1 + ζ + ζ² = 2ζ because ζ² = ζ - 1
        let x = &(&CycloInt::one(6).unwrap() + &z6(1)) + &z6(2);
        assert_eq!(x.as_rational_integer(), None);
        assert_eq!(x, z6(1).scale(&BigInt::from(2)));
    }

    #[test]
    fn embedding_values() {
        let e = z6(1).embed_float();
        assert!((e.re - 0.5).abs() < 1e-15);
        assert!((e.im - 0.866_025_403_784_438_6).abs() < 1e-15);
        let i = CycloInt::zeta_pow(4, 1).unwrap().embed_float();
        assert!(i.re.abs() < 1e-15 && (i.im - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mismatched_orders_rejected() {
        let a = CycloInt::one(6).unwrap();
        let b = CycloInt::one(4).unwrap();
        assert_eq!(
            CycloInt::arith(&a, &b, ArithOp::Mul),
            Err(CycloError::OrderMismatch(6, 4))
        );
    }

    #[test]
    fn lifting_preserves_value() {
        let x = &z6(1) + &z6(4).scale(&BigInt::from(3));
        let y = x.lift(12).unwrap();
        assert_eq!(y.order(), 12);
        assert!((x.embed_float() - y.embed_float()).norm() < 1e-12);
        assert_eq!(z6(1).lift(12).unwrap(), CycloInt::zeta_pow(12, 2).unwrap());
        assert!(x.lift(9).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let x = &z6(1).scale(&BigInt::from(-7)) + &CycloInt::from_int(6, 123_456_789_012_345_678i64).unwrap();
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, r#"{"order":6,"coeffs":["123456789012345678","-7"]}"#);
        let back: CycloInt = serde_json::from_str(&s).unwrap();
        assert_eq!(back, x);
        assert!(serde_json::from_str::<CycloInt>(r#"{"order":6,"coeffs":["1"]}"#).is_err());
    }

    fn arb_elem(order: u32) -> impl Strategy<Value = CycloInt> {
        let phi = totient(order).unwrap();
        prop::collection::vec(-1000i64..1000, phi)
            .prop_map(move |c| CycloInt::from_coeffs(order, c.into_iter().map(BigInt::from).collect()).unwrap())
    }

    fn arb_order_triple() -> impl Strategy<Value = (CycloInt, CycloInt, CycloInt)> {
        prop::sample::select(vec![1u32, 2, 3, 4, 5, 6, 8, 9, 12, 15])
            .prop_flat_map(|n| (arb_elem(n), arb_elem(n), arb_elem(n)))
    }

    proptest! {
        #[test]
        fn ring_axioms((a, b, c) in arb_order_triple()) {
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
            prop_assert!((&a - &a).is_zero());
            prop_assert_eq!(a.conj().conj(), a.clone());
            // reducing an already reduced element is a no-op
            prop_assert_eq!(CycloInt::from_poly(a.order(), a.coeffs()).unwrap(), a.clone());
        }

        #[test]
        fn embedding_is_a_homomorphism((a, b, _c) in arb_order_triple()) {
            let ea = a.embed_float();
            let eb = b.embed_float();
            prop_assert!(((&a * &b).embed_float() - ea * eb).norm() <= 1e-9 * (1.0 + (ea * eb).norm()));
            prop_assert!(((&a + &b).embed_float() - (ea + eb)).norm() <= 1e-9);
            prop_assert!((a.conj().embed_float() - ea.conj()).norm() <= 1e-9 * (1.0 + ea.norm()));
        }
    }
}
