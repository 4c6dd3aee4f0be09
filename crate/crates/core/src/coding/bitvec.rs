use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;

use super::CodingError;

const WORD_BITS: usize = 64;

/// Fixed-length vector over GF(2), packed little-endian into 64-bit words.
///
/// Bit `i` lives in word `i / 64` at position `i % 64`. Bits past `len` in the
/// last word are always zero, so word-level equality and popcounts are exact.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(WORD_BITS)],
        }
    }

    /// Builds a vector from 0/1 values; any nonzero entry counts as a one.
    pub fn from_bits(bits: &[u8]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b != 0 {
                v.set(i, true);
            }
        }
        v
    }

    /// Wraps packed words, rejecting stray bits above `len`.
    pub fn from_words(len: usize, words: Vec<u64>) -> Result<Self, CodingError> {
        if words.len() != len.div_ceil(WORD_BITS) {
            return Err(CodingError::LengthMismatch {
                expected: len.div_ceil(WORD_BITS),
                got: words.len(),
            });
        }
        let v = Self { len, words };
        if v.tail_is_clean() {
            Ok(v)
        } else {
            Err(CodingError::Format(format!(
                "bits set beyond vector length {len}"
            )))
        }
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut v = Self::zeros(len);
        for w in v.words.iter_mut() {
            *w = rng.gen();
        }
        v.clear_tail();
        v
    }

    /// Uniform vector of exact Hamming weight `weight`; the support is the
    /// prefix of a partial Fisher-Yates shuffle of `0..len`.
    pub fn random_of_weight<R: Rng + ?Sized>(len: usize, weight: usize, rng: &mut R) -> Self {
        assert!(weight <= len, "weight {weight} exceeds length {len}");
        let mut idx: Vec<usize> = (0..len).collect();
        let (support, _) = idx.partial_shuffle(rng, weight);
        let mut v = Self::zeros(len);
        for &i in support.iter() {
            v.set(i, true);
        }
        v
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i % WORD_BITS);
        if bit {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    /// Number of one coordinates.
    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn xor(&self, other: &BitVector) -> Result<BitVector, CodingError> {
        let mut out = self.clone();
        out.xor_assign(other)?;
        Ok(out)
    }

    pub fn xor_assign(&mut self, other: &BitVector) -> Result<(), CodingError> {
        self.check_len(other.len)?;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
        Ok(())
    }

    /// Inner product over GF(2).
    pub fn dot(&self, other: &BitVector) -> Result<bool, CodingError> {
        self.check_len(other.len)?;
        let ones: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        Ok(ones & 1 == 1)
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let bit = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * WORD_BITS + bit)
            })
        })
    }

    /// Copy with a new length: zero-extended, or truncated.
    pub fn resized(&self, len: usize) -> BitVector {
        let mut out = BitVector::zeros(len);
        let keep = len.div_ceil(WORD_BITS).min(self.words.len());
        out.words[..keep].copy_from_slice(&self.words[..keep]);
        out.clear_tail();
        out
    }

    /// Packs bits into bytes, bit `i` at byte `i / 8`, position `i % 8`.
    pub fn to_bytes_le(&self) -> Vec<u8> {
        let nbytes = self.len.div_ceil(8);
        self.words
            .iter()
            .flat_map(|w| w.to_le_bytes())
            .take(nbytes)
            .collect()
    }

    pub fn from_bytes_le(len: usize, bytes: &[u8]) -> Result<BitVector, CodingError> {
        if bytes.len() != len.div_ceil(8) {
            return Err(CodingError::LengthMismatch {
                expected: len.div_ceil(8),
                got: bytes.len(),
            });
        }
        let mut words = vec![0u64; len.div_ceil(WORD_BITS)];
        for (i, &b) in bytes.iter().enumerate() {
            words[i / 8] |= (b as u64) << (8 * (i % 8));
        }
        BitVector::from_words(len, words)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes_le())
    }

    pub fn from_hex(len: usize, s: &str) -> Result<BitVector, CodingError> {
        let bytes = hex::decode(s).map_err(|e| CodingError::Format(e.to_string()))?;
        BitVector::from_bytes_le(len, &bytes)
    }

    fn check_len(&self, other: usize) -> Result<(), CodingError> {
        if self.len == other {
            Ok(())
        } else {
            Err(CodingError::LengthMismatch {
                expected: self.len,
                got: other,
            })
        }
    }

    fn tail_mask(&self) -> u64 {
        match self.len % WORD_BITS {
            0 => u64::MAX,
            r => (1u64 << r) - 1,
        }
    }

    fn clear_tail(&mut self) {
        let mask = self.tail_mask();
        if let Some(last) = self.words.last_mut() {
            *last &= mask;
        }
    }

    fn tail_is_clean(&self) -> bool {
        self.words
            .last()
            .is_none_or(|&last| last & !self.tail_mask() == 0)
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}
