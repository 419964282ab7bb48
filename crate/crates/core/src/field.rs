//! Arithmetic in the prime field `Z_p` for word-sized `p`.
//!
//! Every share, token, and interpolation in the crate is built on
//! [`FieldElement`]. Elements carry their modulus so that mixing values from
//! two different fields is caught instead of silently producing garbage.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `2^61 - 1`, a Mersenne prime. Products of two residues fit in `u128`.
pub const DEFAULT_MODULUS: u64 = (1 << 61) - 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} is too small (need p >= 3)")]
    ModulusTooSmall(u64),
    #[error("modulus mismatch: {left} vs {right}")]
    ModulusMismatch { left: u64, right: u64 },
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
}

/// The public parameters of a prime field: just the modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct FieldParams {
    p: u64,
}

impl FieldParams {
    /// Validates `p` with a deterministic Miller-Rabin test.
    pub fn new(p: u64) -> Result<Self, FieldError> {
        if p < 3 {
            return Err(FieldError::ModulusTooSmall(p));
        }
        if !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        Ok(FieldParams { p })
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    /// Reduces `value` into the field.
    pub fn element(&self, value: u64) -> FieldElement {
        FieldElement {
            value: value % self.p,
            p: self.p,
        }
    }

    /// Maps a signed integer to its residue.
    pub fn element_i64(&self, value: i64) -> FieldElement {
        let r = (value as i128).rem_euclid(self.p as i128);
        FieldElement {
            value: r as u64,
            p: self.p,
        }
    }

    pub fn zero(&self) -> FieldElement {
        self.element(0)
    }

    pub fn one(&self) -> FieldElement {
        self.element(1)
    }

    /// Uniform sample from `[0, p)`.
    ///
    /// Draws 64-bit words masked to the smallest power of two `>= p` and
    /// rejects anything out of range, so at most half of the draws are
    /// discarded on average.
    pub fn random_element<R: RngCore + ?Sized>(&self, rng: &mut R) -> FieldElement {
        let mask = u64::MAX >> (self.p - 1).leading_zeros();
        loop {
            let v = rng.next_u64() & mask;
            if v < self.p {
                return FieldElement {
                    value: v,
                    p: self.p,
                };
            }
        }
    }

    /// Uniform sample from `[1, p)`.
    pub fn random_nonzero<R: RngCore + ?Sized>(&self, rng: &mut R) -> FieldElement {
        loop {
            let e = self.random_element(rng);
            if !e.is_zero() {
                return e;
            }
        }
    }

    /// Iterates over every residue in ascending order. Intended for small `p`.
    pub fn elements(&self) -> impl Iterator<Item = FieldElement> + '_ {
        (0..self.p).map(move |v| FieldElement {
            value: v,
            p: self.p,
        })
    }

    /// Bytes needed for the canonical big-endian encoding of a residue.
    pub fn byte_width(&self) -> usize {
        8
    }
}

impl Default for FieldParams {
    fn default() -> Self {
        FieldParams { p: DEFAULT_MODULUS }
    }
}

impl TryFrom<u64> for FieldParams {
    type Error = FieldError;

    fn try_from(p: u64) -> Result<Self, Self::Error> {
        FieldParams::new(p)
    }
}

impl From<FieldParams> for u64 {
    fn from(params: FieldParams) -> u64 {
        params.p
    }
}

/// A canonical residue in `[0, p)` tagged with its modulus.
///
/// The `checked_*` methods report a modulus mismatch as an error. The
/// operator impls panic on mismatch and are meant for code that has already
/// validated its inputs share one field.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement {
    value: u64,
    p: u64,
}

impl FieldElement {
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub fn params(&self) -> FieldParams {
        FieldParams { p: self.p }
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    fn same_field(&self, other: &FieldElement) -> Result<(), FieldError> {
        if self.p == other.p {
            Ok(())
        } else {
            Err(FieldError::ModulusMismatch {
                left: self.p,
                right: other.p,
            })
        }
    }

    pub fn checked_add(&self, other: &FieldElement) -> Result<FieldElement, FieldError> {
        self.same_field(other)?;
        let s = self.value as u128 + other.value as u128;
        Ok(FieldElement {
            value: (s % self.p as u128) as u64,
            p: self.p,
        })
    }

    pub fn checked_sub(&self, other: &FieldElement) -> Result<FieldElement, FieldError> {
        self.same_field(other)?;
        self.checked_add(&other.neg_elem())
    }

    pub fn checked_mul(&self, other: &FieldElement) -> Result<FieldElement, FieldError> {
        self.same_field(other)?;
        Ok(FieldElement {
            value: mul_mod(self.value, other.value, self.p),
            p: self.p,
        })
    }

    fn neg_elem(&self) -> FieldElement {
        FieldElement {
            value: (self.p - self.value) % self.p,
            p: self.p,
        }
    }

    /// Multiplicative inverse by the extended Euclidean algorithm.
    pub fn inv(&self) -> Result<FieldElement, FieldError> {
        if self.value == 0 {
            return Err(FieldError::ZeroInverse);
        }
        let (g, s, _) = ext_gcd(self.value as i128, self.p as i128);
        debug_assert_eq!(g, 1);
        Ok(FieldElement {
            value: s.rem_euclid(self.p as i128) as u64,
            p: self.p,
        })
    }

    pub fn pow(&self, mut exp: u64) -> FieldElement {
        let mut base = self.value;
        let mut acc = 1 % self.p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = mul_mod(acc, base, self.p);
            }
            base = mul_mod(base, base, self.p);
            exp >>= 1;
        }
        FieldElement {
            value: acc,
            p: self.p,
        }
    }

    /// Fixed-width big-endian encoding of the residue.
    pub fn to_be_bytes(&self) -> [u8; 8] {
        self.value.to_be_bytes()
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {})", self.value, self.p)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl Add for FieldElement {
    type Output = FieldElement;

    fn add(self, rhs: FieldElement) -> FieldElement {
        self.checked_add(&rhs).expect("field addition")
    }
}

impl Sub for FieldElement {
    type Output = FieldElement;

    fn sub(self, rhs: FieldElement) -> FieldElement {
        self.checked_sub(&rhs).expect("field subtraction")
    }
}

impl Mul for FieldElement {
    type Output = FieldElement;

    fn mul(self, rhs: FieldElement) -> FieldElement {
        self.checked_mul(&rhs).expect("field multiplication")
    }
}

impl Neg for FieldElement {
    type Output = FieldElement;

    fn neg(self) -> FieldElement {
        self.neg_elem()
    }
}

impl std::iter::Sum for FieldElement {
    /// Panics on an empty iterator since the modulus is unknown.
    fn sum<I: Iterator<Item = FieldElement>>(mut iter: I) -> FieldElement {
        let first = iter.next().expect("sum of an empty field iterator");
        iter.fold(first, |acc, e| acc + e)
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Returns `(g, s, t)` with `a*s + b*t = g = gcd(a, b)`.
fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i128, 0i128);
    let (mut old_t, mut t) = (0i128, 1i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
        (old_t, t) = (t, old_t - q * t);
    }
    (old_r, old_s, old_t)
}

/// Deterministic Miller-Rabin for all 64-bit inputs.
///
/// The first twelve primes form a witness set with no strong pseudoprimes
/// below `3.3 * 10^24`.
pub fn is_prime(n: u64) -> bool {
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &w in &WITNESSES {
        if n.is_multiple_of(w) {
            return n == w;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
