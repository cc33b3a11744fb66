//! Exact arithmetic in Γ_p = PGL₂(ℤ/pℤ).
//!
//! Elements are 2×2 matrices over the prime field ℤ/pℤ, taken modulo scalars
//! and kept in a canonical form: the first nonzero entry in row-major order
//! is scaled to 1, so every projective class has exactly one representative
//! and elements compare, hash and serialize cheaply. Inverses are adjugates
//! (projectively equal to the inverse, no division needed), and the group
//! order is (p−1)·p·(p+1).
//!
//! Scalars are `u32` values reduced after every operation through `u64`
//! intermediates; moduli are restricted to primes below 2³¹.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Largest admissible modulus (exclusive).
pub const MAX_MODULUS: u32 = 1 << 31;

/// Default cap on the order of an enumerated group table.
pub const DEFAULT_TABLE_LIMIT: u64 = 10_000_000;

/// Deterministic primality test by trial division; fine for p < 2³¹.
pub fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    if n.is_multiple_of(3) {
        return n == 3;
    }
    let mut d = 5u64;
    while d * d <= n as u64 {
        if (n as u64).is_multiple_of(d) || (n as u64).is_multiple_of(d + 2) {
            return false;
        }
        d += 6;
    }
    true
}

/// Smallest prime strictly greater than `n`, staying below [`MAX_MODULUS`].
pub fn next_prime(n: u32) -> Option<u32> {
    let mut c = n.checked_add(1)?;
    while c < MAX_MODULUS {
        if is_prime(c) {
            return Some(c);
        }
        c += 1;
    }
    None
}

/// |PGL₂(ℤ/pℤ)| = (p−1)·p·(p+1). Computed in 128-bit arithmetic: near the
/// modulus ceiling the order exceeds u64 and is reported as too large
/// rather than silently wrapping.
pub fn order_formula(p: u32) -> Result<u64> {
    if !is_prime(p) {
        return Err(Error::NotPrime { n: p });
    }
    let p = p as u128;
    let order = (p - 1) * p * (p + 1);
    u64::try_from(order).map_err(|_| Error::TooLarge { size: u64::MAX, limit: u64::MAX })
}

#[inline]
fn fp_check(p: u32) {
    debug_assert!((2..MAX_MODULUS).contains(&p));
}

#[inline]
fn fp_mul(p: u32, a: u32, b: u32) -> u32 {
    ((a as u64 * b as u64) % p as u64) as u32
}

#[inline]
fn fp_add(p: u32, a: u32, b: u32) -> u32 {
    let s = a as u64 + b as u64;
    (s % p as u64) as u32
}

#[inline]
fn fp_sub(p: u32, a: u32, b: u32) -> u32 {
    ((a as u64 + p as u64 - b as u64) % p as u64) as u32
}

#[inline]
fn fp_neg(p: u32, a: u32) -> u32 {
    if a == 0 { 0 } else { p - a }
}

/// Multiplicative inverse mod p by Fermat (p prime).
fn fp_inv(p: u32, a: u32) -> u32 {
    debug_assert!(a != 0);
    let mut base = a as u64;
    let mut exp = p as u64 - 2;
    let m = p as u64;
    let mut acc = 1u64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        exp >>= 1;
    }
    acc as u32
}

/// A 2×2 matrix over ℤ/pℤ, row-major entries `[a, b, c, d]`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Mat2 {
    p: u32,
    e: [u32; 4],
}

impl Mat2 {
    /// Builds a matrix, reducing entries mod p. Requires p prime.
    pub fn new(p: u32, entries: [u32; 4]) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime { n: p });
        }
        let e = entries.map(|x| x % p);
        Ok(Mat2 { p, e })
    }

    #[inline]
    pub fn modulus(&self) -> u32 {
        self.p
    }

    #[inline]
    pub fn entries(&self) -> [u32; 4] {
        self.e
    }

    #[inline]
    pub fn det(&self) -> u32 {
        let p = self.p;
        fp_sub(p, fp_mul(p, self.e[0], self.e[3]), fp_mul(p, self.e[1], self.e[2]))
    }

    /// Classical adjugate `[[d, −b], [−c, a]]`; equals det·inverse.
    #[inline]
    pub fn adjugate(&self) -> Mat2 {
        let p = self.p;
        Mat2 {
            p,
            e: [self.e[3], fp_neg(p, self.e[1]), fp_neg(p, self.e[2]), self.e[0]],
        }
    }

    #[inline]
    fn mul_raw(&self, rhs: &Mat2) -> Mat2 {
        let p = self.p;
        let (a, b, c, d) = (self.e[0], self.e[1], self.e[2], self.e[3]);
        let (e, f, g, h) = (rhs.e[0], rhs.e[1], rhs.e[2], rhs.e[3]);
        Mat2 {
            p,
            e: [
                fp_add(p, fp_mul(p, a, e), fp_mul(p, b, g)),
                fp_add(p, fp_mul(p, a, f), fp_mul(p, b, h)),
                fp_add(p, fp_mul(p, c, e), fp_mul(p, d, g)),
                fp_add(p, fp_mul(p, c, f), fp_mul(p, d, h)),
            ],
        }
    }

    pub fn mul(&self, rhs: &Mat2) -> Result<Mat2> {
        if self.p != rhs.p {
            return Err(Error::ModulusMismatch { left: self.p, right: rhs.p });
        }
        Ok(self.mul_raw(rhs))
    }
}

/// A canonical representative of a projective class in PGL₂(ℤ/pℤ):
/// invertible, with the first nonzero row-major entry equal to 1.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct PglElement {
    m: Mat2,
}

/// Byte length of the canonical wire encoding: 5 little-endian u32 words.
pub const ENCODED_LEN: usize = 20;

impl PglElement {
    /// Scales `m` so the first nonzero entry is 1. Idempotent on canonical
    /// input; rejects singular matrices.
    pub fn canonicalize(m: Mat2) -> Result<Self> {
        fp_check(m.p);
        if m.det() == 0 {
            return Err(Error::SingularMatrix { p: m.p });
        }
        let lead = m.e.iter().copied().find(|&x| x != 0).expect("nonsingular matrix is nonzero");
        if lead == 1 {
            return Ok(PglElement { m });
        }
        let s = fp_inv(m.p, lead);
        let e = m.e.map(|x| fp_mul(m.p, x, s));
        Ok(PglElement { m: Mat2 { p: m.p, e } })
    }

    /// Convenience: build from raw entries and canonicalize.
    pub fn new(p: u32, entries: [u32; 4]) -> Result<Self> {
        Self::canonicalize(Mat2::new(p, entries)?)
    }

    pub fn identity(p: u32) -> Result<Self> {
        Self::new(p, [1, 0, 0, 1])
    }

    #[inline]
    pub fn modulus(&self) -> u32 {
        self.m.p
    }

    #[inline]
    pub fn matrix(&self) -> &Mat2 {
        &self.m
    }

    #[inline]
    pub fn entries(&self) -> [u32; 4] {
        self.m.e
    }

    #[inline]
    pub fn is_identity(&self) -> bool {
        self.m.e == [1, 0, 0, 1]
    }

    pub fn mul(&self, rhs: &PglElement) -> Result<PglElement> {
        let prod = self.m.mul(&rhs.m)?;
        Self::canonicalize(prod)
    }

    /// Projective inverse via the adjugate; never fails on a valid element.
    pub fn inv(&self) -> PglElement {
        Self::canonicalize(self.m.adjugate()).expect("adjugate of invertible matrix is invertible")
    }

    /// Wire encoding: little-endian u32 words (p, a, b, c, d).
    pub fn to_bytes(&self) -> [u8; ENCODED_LEN] {
        let mut out = [0u8; ENCODED_LEN];
        out[0..4].copy_from_slice(&self.m.p.to_le_bytes());
        for (i, &x) in self.m.e.iter().enumerate() {
            out[4 + 4 * i..8 + 4 * i].copy_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<PglElement> {
        if bytes.len() != ENCODED_LEN {
            return Err(Error::Format(format!(
                "element encoding must be {ENCODED_LEN} bytes, got {}",
                bytes.len()
            )));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
        let p = word(0);
        let e = [word(1), word(2), word(3), word(4)];
        if !is_prime(p) {
            return Err(Error::NotPrime { n: p });
        }
        if e.iter().any(|&x| x >= p) {
            return Err(Error::Format("entry not reduced mod p".into()));
        }
        let elem = PglElement::canonicalize(Mat2 { p, e })?;
        if elem.m.e != e {
            return Err(Error::Format("encoded element is not in canonical form".into()));
        }
        Ok(elem)
    }
}

impl std::fmt::Display for PglElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let [a, b, c, d] = self.m.e;
        write!(f, "[[{a},{b}],[{c},{d}]] mod {}", self.m.p)
    }
}

/// Full enumeration of Γ_p with an element → ordinal index.
///
/// Elements are stored in increasing order of their entry tuple (a, b, c, d),
/// which is also the order the canonical-form scan below produces them in.
/// The table is immutable after construction and freely shared across threads.
#[derive(Debug)]
pub struct GroupTable {
    p: u32,
    elements: Vec<PglElement>,
    index: HashMap<PglElement, u32>,
}

impl GroupTable {
    pub fn build(p: u32) -> Result<Self> {
        Self::build_with_limit(p, DEFAULT_TABLE_LIMIT)
    }

    /// Enumerates every canonical matrix directly: either a = 1 with
    /// d ≠ bc, or a = 0, b = 1, c ≠ 0, d free. Both families are scanned in
    /// lexicographic entry order, so the result is sorted without a sort.
    pub fn build_with_limit(p: u32, limit: u64) -> Result<Self> {
        let order = order_formula(p)?;
        if order > limit {
            return Err(Error::TooLarge { size: order, limit });
        }
        let mut elements = Vec::with_capacity(order as usize);
        // a = 0, b = 1: det = −c, so any c ≠ 0, d arbitrary.
        for c in 1..p {
            for d in 0..p {
                elements.push(PglElement { m: Mat2 { p, e: [0, 1, c, d] } });
            }
        }
        // a = 1: det = d − bc, so d ≠ bc.
        for b in 0..p {
            for c in 0..p {
                let bc = fp_mul(p, b, c);
                for d in 0..p {
                    if d != bc {
                        elements.push(PglElement { m: Mat2 { p, e: [1, b, c, d] } });
                    }
                }
            }
        }
        debug_assert_eq!(elements.len() as u64, order);
        debug_assert!(elements.windows(2).all(|w| w[0] < w[1]));
        let index = elements
            .iter()
            .enumerate()
            .map(|(i, &g)| (g, i as u32))
            .collect();
        Ok(GroupTable { p, elements, index })
    }

    #[inline]
    pub fn p(&self) -> u32 {
        self.p
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    #[inline]
    pub fn elements(&self) -> &[PglElement] {
        &self.elements
    }

    #[inline]
    pub fn element(&self, i: usize) -> &PglElement {
        &self.elements[i]
    }

    pub fn index_of(&self, g: &PglElement) -> Result<u32> {
        if g.modulus() != self.p {
            return Err(Error::ModulusMismatch { left: g.modulus(), right: self.p });
        }
        Ok(*self.index.get(g).expect("canonical element of Γ_p is in the table"))
    }

    /// Permutation i ↦ index(g · element_i) of the left translation by g.
    pub fn left_mul_perm(&self, g: &PglElement) -> Result<Vec<u32>> {
        if g.modulus() != self.p {
            return Err(Error::ModulusMismatch { left: g.modulus(), right: self.p });
        }
        let mut perm = vec![0u32; self.order()];
        for (i, x) in self.elements.iter().enumerate() {
            let gx = PglElement::canonicalize(g.m.mul_raw(&x.m))
                .expect("product of invertible matrices is invertible");
            perm[i] = self.index[&gx];
        }
        Ok(perm)
    }

    pub fn identity(&self) -> PglElement {
        PglElement { m: Mat2 { p: self.p, e: [1, 0, 0, 1] } }
    }
}

/// Uniform sample from Γ_p by rejection: draw four entries uniformly, reject
/// singular matrices, canonicalize. The uniform measure on GL₂ pushes to the
/// uniform measure on PGL₂ because every fiber of the quotient has exactly
/// p−1 points.
pub fn sample_uniform(p: u32, stream: &mut Stream) -> Result<PglElement> {
    if !is_prime(p) {
        return Err(Error::NotPrime { n: p });
    }
    loop {
        let e = [
            stream.next_below(p as u64) as u32,
            stream.next_below(p as u64) as u32,
            stream.next_below(p as u64) as u32,
            stream.next_below(p as u64) as u32,
        ];
        let m = Mat2 { p, e };
        if m.det() != 0 {
            return PglElement::canonicalize(m);
        }
    }
}
