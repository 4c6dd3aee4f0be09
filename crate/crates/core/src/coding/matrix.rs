use rand::Rng;

use super::{BitVector, CodingError};

/// Row-major `(n - k) x n` parity-check matrix over GF(2).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParityCheckMatrix {
    n: usize,
    k: usize,
    rows: Vec<BitVector>,
}

impl ParityCheckMatrix {
    pub fn new(n: usize, k: usize, rows: Vec<BitVector>) -> Result<Self, CodingError> {
        if k >= n {
            return Err(CodingError::InvalidParameters(format!(
                "need 0 <= k < n, got n={n}, k={k}"
            )));
        }
        if rows.len() != n - k {
            return Err(CodingError::LengthMismatch {
                expected: n - k,
                got: rows.len(),
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(CodingError::LengthMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        Ok(Self { n, k, rows })
    }

    /// Uniformly random matrix.
    pub fn random<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Self, CodingError> {
        if k >= n {
            return Err(CodingError::InvalidParameters(format!(
                "need 0 <= k < n, got n={n}, k={k}"
            )));
        }
        let rows = (0..n - k).map(|_| BitVector::random(n, rng)).collect();
        Self::new(n, k, rows)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of rows, `n - k`.
    #[inline]
    pub fn redundancy(&self) -> usize {
        self.n - self.k
    }

    pub fn rows(&self) -> &[BitVector] {
        &self.rows
    }

    pub fn column(&self, j: usize) -> BitVector {
        let mut col = BitVector::zeros(self.redundancy());
        for (i, row) in self.rows.iter().enumerate() {
            if row.get(j) {
                col.set(i, true);
            }
        }
        col
    }

    /// `H * v`: row `i` of the result is the parity of `row_i AND v`.
    pub fn mul_vec(&self, v: &BitVector) -> Result<BitVector, CodingError> {
        if v.len() != self.n {
            return Err(CodingError::LengthMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        let mut out = BitVector::zeros(self.redundancy());
        for (i, row) in self.rows.iter().enumerate() {
            if row.dot(v)? {
                out.set(i, true);
            }
        }
        Ok(out)
    }

    /// Some `x` with `H x = s`, found by Gaussian elimination with every free
    /// variable set to zero. `None` when `s` is outside the column space.
    pub fn solve(&self, s: &BitVector) -> Result<Option<BitVector>, CodingError> {
        let m = self.redundancy();
        if s.len() != m {
            return Err(CodingError::LengthMismatch {
                expected: m,
                got: s.len(),
            });
        }
        // augmented rows: n coefficient bits followed by the right-hand side bit
        let mut aug: Vec<BitVector> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = row.resized(self.n + 1);
                r.set(self.n, s.get(i));
                r
            })
            .collect();

        let mut pivots = Vec::with_capacity(m);
        let mut rank = 0;
        for col in 0..self.n {
            if rank == m {
                break;
            }
            let Some(p) = (rank..m).find(|&r| aug[r].get(col)) else {
                continue;
            };
            aug.swap(rank, p);
            let pivot = aug[rank].clone();
            for (r, row) in aug.iter_mut().enumerate() {
                if r != rank && row.get(col) {
                    row.xor_assign(&pivot)?;
                }
            }
            pivots.push(col);
            rank += 1;
        }

        if aug[rank..].iter().any(|r| r.get(self.n)) {
            return Ok(None);
        }
        let mut x = BitVector::zeros(self.n);
        for (r, &col) in pivots.iter().enumerate() {
            if aug[r].get(self.n) {
                x.set(col, true);
            }
        }
        Ok(Some(x))
    }

    /// Hex rows in the instance-file encoding.
    pub fn to_hex_rows(&self) -> Vec<String> {
        self.rows.iter().map(BitVector::to_hex).collect()
    }

    pub fn from_hex_rows(n: usize, k: usize, rows: &[String]) -> Result<Self, CodingError> {
        let rows = rows
            .iter()
            .map(|r| BitVector::from_hex(n, r))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(n, k, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn naive_mul(h: &ParityCheckMatrix, v: &BitVector) -> BitVector {
        let mut out = BitVector::zeros(h.redundancy());
        for i in 0..h.redundancy() {
            let mut acc = false;
            for j in 0..h.n() {
                acc ^= h.rows()[i].get(j) & v.get(j);
            }
            out.set(i, acc);
        }
        out
    }

    #[test]
    fn zero_vector_maps_to_zero() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let h = ParityCheckMatrix::random(100, 40, &mut rng).unwrap();
        assert!(h.mul_vec(&BitVector::zeros(100)).unwrap().is_zero());
    }

    #[test]
    fn identity_layout_is_identity() {
        // k = 0 gives a square matrix; fill it with the identity
        let n = 9;
        let rows = (0..n)
            .map(|i| {
                let mut r = BitVector::zeros(n);
                r.set(i, true);
                r
            })
            .collect();
        let h = ParityCheckMatrix::new(n, 0, rows).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let v = BitVector::random(n, &mut rng);
        assert_eq!(h.mul_vec(&v).unwrap(), v);
    }

    #[test]
    fn matches_double_loop_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..200 {
            let h = ParityCheckMatrix::random(10, 4, &mut rng).unwrap();
            let v = BitVector::random(10, &mut rng);
            assert_eq!(h.mul_vec(&v).unwrap(), naive_mul(&h, &v));
        }
        let h = ParityCheckMatrix::random(300, 130, &mut rng).unwrap();
        let v = BitVector::random(300, &mut rng);
        assert_eq!(h.mul_vec(&v).unwrap(), naive_mul(&h, &v));
    }

    #[test]
    fn linearity() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let h = ParityCheckMatrix::random(150, 70, &mut rng).unwrap();
        for _ in 0..100 {
            let a = BitVector::random(150, &mut rng);
            let b = BitVector::random(150, &mut rng);
            let lhs = h.mul_vec(&a.xor(&b).unwrap()).unwrap();
            let rhs = h.mul_vec(&a).unwrap().xor(&h.mul_vec(&b).unwrap()).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn length_mismatch_is_error() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let h = ParityCheckMatrix::random(10, 4, &mut rng).unwrap();
        assert!(h.mul_vec(&BitVector::zeros(9)).is_err());
        assert!(ParityCheckMatrix::new(10, 4, vec![BitVector::zeros(10)]).is_err());
        assert!(ParityCheckMatrix::new(4, 4, vec![]).is_err());
    }

    #[test]
    fn solve_finds_a_preimage() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for _ in 0..100 {
            let h = ParityCheckMatrix::random(40, 16, &mut rng).unwrap();
            let x0 = BitVector::random(40, &mut rng);
            let s = h.mul_vec(&x0).unwrap();
            let x = h.solve(&s).unwrap().expect("s is in the column space");
            assert_eq!(h.mul_vec(&x).unwrap(), s);
        }
    }

    #[test]
    fn solve_detects_inconsistent_system() {
        // both rows equal, right-hand sides differ
        let row = BitVector::from_bits(&[1, 1, 0, 0]);
        let h = ParityCheckMatrix::new(4, 2, vec![row.clone(), row]).unwrap();
        assert!(h.solve(&BitVector::from_bits(&[1, 0])).unwrap().is_none());
        assert!(h.solve(&BitVector::from_bits(&[1, 1])).unwrap().is_some());
    }
}
