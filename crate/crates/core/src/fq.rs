//! Exact arithmetic in `F_Q`, and the encodings that carry protocol objects
//! into the field.
//!
//! The production modulus is a Mersenne prime `Q = 2^q - 1`, which turns
//! reduction into a shift-and-add: `x_hi * 2^q + x_lo ≡ x_hi + x_lo`. Small
//! odd primes are accepted in test mode after a Miller-Rabin check and are
//! reduced by plain division.
//!
//! Encodings into `F_Q`:
//! - a bit vector `v` of length `n` maps to `Σ v_i 2^i` (little-endian);
//! - a pair `(σ, s')` maps to `rank(σ) * 2^n + int(s')`, where `rank` is the
//!   lexicographic Lehmer rank and `s'` is zero-padded to `n` bits.
//!
//! Decoding a value outside the image of an encoding is a [`MappingFailure`].

use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::RngCore;
use thiserror::Error;

use crate::coding::{BitVector, Permutation};

/// Exponents `q` for which `2^q - 1` is prime, up to 44497.
pub const MERSENNE_EXPONENTS: &[u32] = &[
    2, 3, 5, 7, 13, 17, 19, 31, 61, 89, 107, 127, 521, 607, 1279, 2203, 2281, 3217, 4253, 4423,
    9689, 9941, 11213, 19937, 21701, 23209, 44497,
];

/// Exponent of the modulus used by the full-size protocol.
pub const PROTOCOL_EXPONENT: u32 = 23209;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FqError {
    #[error("field elements belong to different fields")]
    ParamMismatch,
    #[error("division by zero")]
    DivisionByZero,
    #[error("2^{0} - 1 is not in the accepted Mersenne exponent list")]
    UnsupportedExponent(u32),
    #[error("{0} is not an odd prime")]
    NotPrime(u64),
    #[error("modulus too small to embed {what} for code length {n}")]
    Capacity { what: &'static str, n: usize },
    #[error("expected a {expected}-byte field element, got {got} bytes")]
    Width { expected: usize, got: usize },
    #[error("value is not reduced below the modulus")]
    NonCanonical,
}

/// A decoded value fell outside the encoding's range. This is an outcome of
/// checking hostile input, not an internal fault.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("field element outside the encoding range")]
pub struct MappingFailure;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Reduction {
    Mersenne,
    Division,
}

/// Description of `F_Q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldParams {
    modulus: BigUint,
    /// Bit length of the modulus; equals `q` for `Q = 2^q - 1`.
    q_exponent: u32,
    reduction: Reduction,
    byte_width: usize,
    /// Largest `n` with `n! * 2^n <= Q`.
    max_code_length: usize,
}

pub type Field = Arc<FieldParams>;

impl FieldParams {
    /// `F_Q` for `Q = 2^q - 1`; `q` must be a known Mersenne exponent.
    pub fn mersenne(q: u32) -> Result<Field, FqError> {
        if !MERSENNE_EXPONENTS.contains(&q) {
            return Err(FqError::UnsupportedExponent(q));
        }
        let modulus = (BigUint::one() << q as usize) - 1u32;
        Ok(Arc::new(Self::build(modulus, Reduction::Mersenne)))
    }

    /// Test-mode field for an arbitrary odd prime.
    pub fn prime(p: u64) -> Result<Field, FqError> {
        if p < 3 || p.is_multiple_of(2) || !is_prime_u64(p) {
            return Err(FqError::NotPrime(p));
        }
        // Mersenne primes still get the fast path
        let reduction = if (p + 1).is_power_of_two() {
            Reduction::Mersenne
        } else {
            Reduction::Division
        };
        Ok(Arc::new(Self::build(BigUint::from(p), reduction)))
    }

    /// Mersenne field that must also embed the objects of a length-`n` code.
    pub fn mersenne_for_code(q: u32, n: usize) -> Result<Field, FqError> {
        let f = Self::mersenne(q)?;
        f.require_code_length(n)?;
        Ok(f)
    }

    fn build(modulus: BigUint, reduction: Reduction) -> Self {
        let q_exponent = modulus.bits() as u32;
        let mut max_code_length = 0usize;
        let mut size = BigUint::one(); // n! * 2^n at n = max_code_length
        loop {
            let next = &size * (2 * (max_code_length as u64 + 1));
            if next > modulus {
                break;
            }
            size = next;
            max_code_length += 1;
        }
        Self {
            byte_width: (q_exponent as usize).div_ceil(8),
            modulus,
            q_exponent,
            reduction,
            max_code_length,
        }
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn q_exponent(&self) -> u32 {
        self.q_exponent
    }

    pub fn is_mersenne(&self) -> bool {
        self.reduction == Reduction::Mersenne
    }

    /// Wire width of one element, `ceil(q / 8)` bytes.
    pub fn byte_width(&self) -> usize {
        self.byte_width
    }

    pub fn max_code_length(&self) -> usize {
        self.max_code_length
    }

    /// Checks `Q >= 2^n` and `Q >= n! * 2^n`.
    pub fn require_code_length(&self, n: usize) -> Result<(), FqError> {
        if n <= self.max_code_length {
            Ok(())
        } else {
            Err(FqError::Capacity {
                what: "permutation-syndrome pairs",
                n,
            })
        }
    }

    fn reduce(&self, mut x: BigUint) -> BigUint {
        match self.reduction {
            Reduction::Mersenne => {
                let q = self.q_exponent as u64;
                while x.bits() > q {
                    let hi = &x >> q;
                    x &= &self.modulus;
                    x += hi;
                }
                if x == self.modulus {
                    x.set_zero();
                }
                x
            }
            Reduction::Division => x % &self.modulus,
        }
    }
}

/// Deterministic Miller-Rabin for 64-bit integers.
fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in WITNESSES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        acc
    };
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in WITNESSES {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// An element of `F_Q`, always fully reduced into `[0, Q)`.
#[derive(Clone, PartialEq, Eq)]
pub struct FieldElement {
    value: BigUint,
    field: Field,
}

impl FieldElement {
    /// Reduces `value` modulo `Q`.
    pub fn new(field: &Field, value: BigUint) -> Self {
        Self {
            value: field.reduce(value),
            field: Arc::clone(field),
        }
    }

    pub fn from_u64(field: &Field, value: u64) -> Self {
        Self::new(field, BigUint::from(value))
    }

    pub fn zero(field: &Field) -> Self {
        Self {
            value: BigUint::zero(),
            field: Arc::clone(field),
        }
    }

    pub fn one(field: &Field) -> Self {
        Self::from_u64(field, 1)
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    fn same_field(&self, other: &Self) -> Result<(), FqError> {
        if Arc::ptr_eq(&self.field, &other.field) || self.field == other.field {
            Ok(())
        } else {
            Err(FqError::ParamMismatch)
        }
    }

    fn with_value(&self, value: BigUint) -> Self {
        Self {
            value,
            field: Arc::clone(&self.field),
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, FqError> {
        self.same_field(other)?;
        let mut v = &self.value + &other.value;
        if v >= self.field.modulus {
            v -= &self.field.modulus;
        }
        Ok(self.with_value(v))
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, FqError> {
        self.same_field(other)?;
        let v = if self.value >= other.value {
            &self.value - &other.value
        } else {
            &self.value + &self.field.modulus - &other.value
        };
        Ok(self.with_value(v))
    }

    pub fn neg(&self) -> Self {
        if self.value.is_zero() {
            self.clone()
        } else {
            self.with_value(&self.field.modulus - &self.value)
        }
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, FqError> {
        self.same_field(other)?;
        Ok(self.with_value(self.field.reduce(&self.value * &other.value)))
    }

    pub fn pow(&self, exponent: &BigUint) -> Self {
        let mut acc = Self::one(&self.field);
        for i in (0..exponent.bits()).rev() {
            acc = acc.checked_mul(&acc).expect("same field");
            if exponent.bit(i) {
                acc = acc.checked_mul(self).expect("same field");
            }
        }
        acc
    }

    /// Multiplicative inverse by Fermat: `x^(Q-2)`.
    pub fn inverse(&self) -> Result<Self, FqError> {
        if self.is_zero() {
            return Err(FqError::DivisionByZero);
        }
        Ok(self.pow(&(&self.field.modulus - 2u32)))
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self, FqError> {
        self.same_field(other)?;
        self.checked_mul(&other.inverse()?)
    }

    /// Uniform element by rejection sampling: draw `ceil(q/8)` bytes, clear
    /// the bits above `q`, and retry while the result is `>= Q`.
    pub fn random<R: RngCore + ?Sized>(field: &Field, rng: &mut R) -> Self {
        let width = field.byte_width;
        let excess = width * 8 - field.q_exponent as usize;
        let mut buf = vec![0u8; width];
        loop {
            rng.fill_bytes(&mut buf);
            buf[0] &= 0xffu8 >> excess;
            let v = BigUint::from_bytes_be(&buf);
            if v < field.modulus {
                return Self {
                    value: v,
                    field: Arc::clone(field),
                };
            }
        }
    }

    /// Fixed-width big-endian encoding of `ceil(q/8)` bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let raw = self.value.to_bytes_be();
        let width = self.field.byte_width;
        let mut out = vec![0u8; width];
        if !self.value.is_zero() {
            out[width - raw.len()..].copy_from_slice(&raw);
        }
        out
    }

    /// Parses the fixed-width encoding; rejects values `>= Q`.
    pub fn from_bytes(field: &Field, bytes: &[u8]) -> Result<Self, FqError> {
        if bytes.len() != field.byte_width {
            return Err(FqError::Width {
                expected: field.byte_width,
                got: bytes.len(),
            });
        }
        let value = BigUint::from_bytes_be(bytes);
        if value >= field.modulus {
            return Err(FqError::NonCanonical);
        }
        Ok(Self {
            value,
            field: Arc::clone(field),
        })
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(field: &Field, s: &str) -> Result<Self, FqError> {
        let bytes = hex::decode(s).map_err(|_| FqError::Width {
            expected: field.byte_width,
            got: s.len() / 2,
        })?;
        Self::from_bytes(field, &bytes)
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.value.bits() <= 128 {
            write!(f, "Fq({} mod 2^{})", self.value, self.field.q_exponent)
        } else {
            write!(
                f,
                "Fq(<{} bits> mod 2^{})",
                self.value.bits(),
                self.field.q_exponent
            )
        }
    }
}

fn bitvec_to_biguint(v: &BitVector) -> BigUint {
    let digits: Vec<u32> = v
        .words()
        .iter()
        .flat_map(|&w| [w as u32, (w >> 32) as u32])
        .collect();
    BigUint::new(digits)
}

fn low_bits_to_bitvec(x: &BigUint, n: usize) -> BitVector {
    let mut words = x.to_u64_digits();
    words.resize(n.div_ceil(64), 0);
    let rem = n % 64;
    if rem != 0 {
        if let Some(last) = words.last_mut() {
            *last &= (1u64 << rem) - 1;
        }
    }
    BitVector::from_words(n, words).expect("tail bits cleared")
}

/// `Σ v_i 2^i` as a field element.
pub fn encode_bitvec(v: &BitVector, field: &Field) -> Result<FieldElement, FqError> {
    if v.len() >= field.q_exponent as usize {
        return Err(FqError::Capacity {
            what: "bit vectors",
            n: v.len(),
        });
    }
    Ok(FieldElement::new(field, bitvec_to_biguint(v)))
}

/// Inverse of [`encode_bitvec`]; fails for values `>= 2^n`.
pub fn decode_bitvec(x: &FieldElement, n: usize) -> Result<BitVector, MappingFailure> {
    if x.value.bits() > n as u64 {
        return Err(MappingFailure);
    }
    Ok(low_bits_to_bitvec(&x.value, n))
}

/// `rank(σ) * 2^n + int(s')` with `s'` zero-padded to `n = |σ|` bits.
pub fn encode_perm_syndrome(
    sigma: &Permutation,
    s_prime: &BitVector,
    field: &Field,
) -> Result<FieldElement, FqError> {
    let n = sigma.len();
    field.require_code_length(n)?;
    if s_prime.len() > n {
        return Err(FqError::Capacity {
            what: "syndromes longer than the code",
            n: s_prime.len(),
        });
    }
    let value = (sigma.lehmer_rank() << n) + bitvec_to_biguint(s_prime);
    Ok(FieldElement::new(field, value))
}

/// Inverse of [`encode_perm_syndrome`]; fails iff `x >= n! * 2^n`. The
/// returned syndrome has length `n`.
pub fn decode_perm_syndrome(
    x: &FieldElement,
    n: usize,
) -> Result<(Permutation, BitVector), MappingFailure> {
    let s_prime = low_bits_to_bitvec(&x.value, n);
    let rank = &x.value >> n;
    let sigma = Permutation::from_lehmer_rank(&rank, n).ok_or(MappingFailure)?;
    Ok((sigma, s_prime))
}
