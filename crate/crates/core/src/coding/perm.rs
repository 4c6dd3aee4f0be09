use num_bigint::BigUint;
use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::Rng;

use super::{BitVector, CodingError};

/// A bijection on `0..n`, stored as its image table.
///
/// Applying `sigma` to a vector moves coordinate `i` to position `sigma(i)`:
/// `apply(sigma, v)[sigma(i)] = v[i]`. Prover and verifier must agree on
/// this, so it is part of the wire format.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            images: (0..n).collect(),
        }
    }

    pub fn from_images(images: Vec<usize>) -> Result<Self, CodingError> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &x in &images {
            if x >= n || std::mem::replace(&mut seen[x], true) {
                return Err(CodingError::InvalidPermutation);
            }
        }
        Ok(Self { images })
    }

    /// Uniform permutation via Fisher-Yates.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut images: Vec<usize> = (0..n).collect();
        images.shuffle(rng);
        Self { images }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    #[inline]
    pub fn image(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.images.len()];
        for (i, &x) in self.images.iter().enumerate() {
            inv[x] = i;
        }
        Permutation { images: inv }
    }

    /// `self ∘ other`, i.e. `other` first.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation, CodingError> {
        if self.len() != other.len() {
            return Err(CodingError::LengthMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(Permutation {
            images: other.images.iter().map(|&i| self.images[i]).collect(),
        })
    }

    pub fn apply(&self, v: &BitVector) -> Result<BitVector, CodingError> {
        if v.len() != self.len() {
            return Err(CodingError::LengthMismatch {
                expected: self.len(),
                got: v.len(),
            });
        }
        let mut out = BitVector::zeros(v.len());
        for i in v.iter_ones() {
            out.set(self.images[i], true);
        }
        Ok(out)
    }

    /// Position of this permutation in the lexicographic order of image
    /// tables, computed from its Lehmer code. The identity has rank 0.
    pub fn lehmer_rank(&self) -> BigUint {
        let n = self.len();
        let mut remaining: Vec<usize> = (0..n).collect();
        let mut rank = BigUint::zero();
        for (i, &x) in self.images.iter().enumerate() {
            // remaining stays sorted, so the search index is the Lehmer digit
            let digit = remaining.binary_search(&x).expect("images are distinct");
            remaining.remove(digit);
            rank *= (n - i) as u64;
            rank += digit as u64;
        }
        rank
    }

    /// Inverse of [`Permutation::lehmer_rank`]; `None` when `rank >= n!`.
    pub fn from_lehmer_rank(rank: &BigUint, n: usize) -> Option<Permutation> {
        let mut r = rank.clone();
        let mut digits = vec![0usize; n];
        for radix in 1..=n {
            let d = &r % radix as u64;
            r /= radix as u64;
            digits[n - radix] = d.try_into().expect("digit below radix");
        }
        if !r.is_zero() {
            return None;
        }
        let mut remaining: Vec<usize> = (0..n).collect();
        let images = digits.into_iter().map(|d| remaining.remove(d)).collect();
        Some(Permutation { images })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn identity_is_noop() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let v = BitVector::random(33, &mut rng);
        assert_eq!(Permutation::identity(33).apply(&v).unwrap(), v);
    }

    #[test]
    fn convention_small_example() {
        // sigma moves coordinate 0 to position 2
        let sigma = Permutation::from_images(vec![2, 0, 1]).unwrap();
        let v = BitVector::from_bits(&[1, 0, 0]);
        assert_eq!(sigma.apply(&v).unwrap(), BitVector::from_bits(&[0, 0, 1]));
        let v = BitVector::from_bits(&[0, 1, 0]);
        assert_eq!(sigma.apply(&v).unwrap(), BitVector::from_bits(&[1, 0, 0]));
    }

    #[test]
    fn rejects_non_bijections() {
        assert!(Permutation::from_images(vec![0, 0, 1]).is_err());
        assert!(Permutation::from_images(vec![0, 3, 1]).is_err());
    }

    #[test]
    fn length_mismatch() {
        let p = Permutation::identity(4);
        assert!(p.apply(&BitVector::zeros(5)).is_err());
        assert!(p.compose(&Permutation::identity(3)).is_err());
    }

    #[test]
    fn ranks_enumerate_lexicographically() {
        // all 4! permutations in lexicographic order of their image tables
        let mut all = Vec::new();
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        if let Ok(p) = Permutation::from_images(vec![a, b, c, d]) {
                            all.push(p);
                        }
                    }
                }
            }
        }
        assert_eq!(all.len(), 24);
        for (i, p) in all.iter().enumerate() {
            assert_eq!(p.lehmer_rank(), BigUint::from(i));
            assert_eq!(Permutation::from_lehmer_rank(&BigUint::from(i), 4).as_ref(), Some(p));
        }
        assert!(Permutation::from_lehmer_rank(&BigUint::from(24u32), 4).is_none());
    }

    #[test]
    fn large_rank_roundtrip() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let p = Permutation::random(1704, &mut rng);
        let r = p.lehmer_rank();
        assert_eq!(Permutation::from_lehmer_rank(&r, 1704).unwrap(), p);
    }

    proptest! {
        #[test]
        fn inverse_undoes_apply(seed in any::<u64>(), n in 1usize..200) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let p = Permutation::random(n, &mut rng);
            let a = BitVector::random(n, &mut rng);
            let b = BitVector::random(n, &mut rng);
            let pa = p.apply(&a).unwrap();
            prop_assert_eq!(p.inverse().apply(&pa).unwrap(), a.clone());
            prop_assert_eq!(pa.weight(), a.weight());
            prop_assert_eq!(p.compose(&p.inverse()).unwrap(), Permutation::identity(n));
            // XOR commutes with coordinate permutation
            let lhs = p.apply(&a.xor(&b).unwrap()).unwrap();
            let rhs = pa.xor(&p.apply(&b).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn rank_roundtrip(seed in any::<u64>(), n in 0usize..60) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let p = Permutation::random(n, &mut rng);
            prop_assert_eq!(Permutation::from_lehmer_rank(&p.lehmer_rank(), n), Some(p));
        }
    }
}
