use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BitVector, CodingError, ParityCheckMatrix};

/// Largest code length for which NO instances are certified by enumeration.
pub const MAX_CERTIFIABLE_N: usize = 24;

/// Default cap on the number of weight-`w` supports `brute_force_solve` visits.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 26;

/// A Syndrome Decoding instance `(H, s, n, k, w)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SdInstance {
    pub h: ParityCheckMatrix,
    pub s: BitVector,
    pub w: usize,
}

/// A claimed solution `e` with `H e = s` and `|e| = w`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SdWitness {
    pub e: BitVector,
}

impl SdInstance {
    pub fn new(h: ParityCheckMatrix, s: BitVector, w: usize) -> Result<Self, CodingError> {
        if s.len() != h.redundancy() {
            return Err(CodingError::LengthMismatch {
                expected: h.redundancy(),
                got: s.len(),
            });
        }
        if w == 0 || w > h.n() {
            return Err(CodingError::InvalidParameters(format!(
                "need 0 < w <= n, got w={w}, n={}",
                h.n()
            )));
        }
        Ok(Self { h, s, w })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.h.n()
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.h.k()
    }

    pub fn is_solution(&self, e: &BitVector) -> bool {
        e.len() == self.n() && e.weight() == self.w && self.h.mul_vec(e).is_ok_and(|s| s == self.s)
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            n: self.n(),
            k: self.k(),
            w: self.w,
            h: self.h.to_hex_rows(),
            s: self.s.to_hex(),
        }
    }
}

/// JSON layout of an instance file. Rows of `H` and the syndrome are hex of
/// the little-endian bit packing (bit `i` in byte `i / 8`, position `i % 8`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    pub k: usize,
    pub w: usize,
    pub h: Vec<String>,
    pub s: String,
}

impl InstanceFile {
    pub fn into_instance(&self) -> Result<SdInstance, CodingError> {
        let h = ParityCheckMatrix::from_hex_rows(self.n, self.k, &self.h)?;
        let s = BitVector::from_hex(h.redundancy(), &self.s)?;
        SdInstance::new(h, s, self.w)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessFile {
    pub n: usize,
    pub e: String,
}

impl SdWitness {
    pub fn to_file(&self) -> WitnessFile {
        WitnessFile {
            n: self.e.len(),
            e: self.e.to_hex(),
        }
    }
}

impl WitnessFile {
    pub fn into_witness(&self) -> Result<SdWitness, CodingError> {
        Ok(SdWitness {
            e: BitVector::from_hex(self.n, &self.e)?,
        })
    }
}

fn check_params(n: usize, k: usize, w: usize) -> Result<(), CodingError> {
    if k == 0 || k >= n || w == 0 || w > n {
        return Err(CodingError::InvalidParameters(format!(
            "need 0 < k < n and 0 < w <= n, got n={n}, k={k}, w={w}"
        )));
    }
    Ok(())
}

/// Random instance with a planted solution: uniform `H`, uniform weight-`w`
/// error `e`, and `s = H e`.
pub fn gen_yes_instance<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    w: usize,
    rng: &mut R,
) -> Result<(SdInstance, SdWitness), CodingError> {
    check_params(n, k, w)?;
    let h = ParityCheckMatrix::random(n, k, rng)?;
    let e = BitVector::random_of_weight(n, w, rng);
    let s = h.mul_vec(&e)?;
    Ok((SdInstance::new(h, s, w)?, SdWitness { e }))
}

/// Random instance certified to have no weight-`w` solution by exhaustive
/// search. Resamples `(H, s)` until the search comes back empty.
pub fn gen_no_instance<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    w: usize,
    rng: &mut R,
) -> Result<SdInstance, CodingError> {
    check_params(n, k, w)?;
    if n > MAX_CERTIFIABLE_N {
        return Err(CodingError::TooLarge(format!(
            "cannot certify NO instances above n={MAX_CERTIFIABLE_N} (got n={n})"
        )));
    }
    const MAX_ATTEMPTS: usize = 10_000;
    for _ in 0..MAX_ATTEMPTS {
        let h = ParityCheckMatrix::random(n, k, rng)?;
        let s = BitVector::random(n - k, rng);
        let inst = SdInstance::new(h, s, w)?;
        if brute_force_solve(&inst)?.is_none() {
            return Ok(inst);
        }
    }
    Err(CodingError::InvalidParameters(format!(
        "no NO instance found in {MAX_ATTEMPTS} draws for n={n}, k={k}, w={w}"
    )))
}

/// `C(n, r)` saturating at `u128::MAX`.
pub fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        // exact at every step: acc * (n - i) is divisible by (i + 1)
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// First weight-`w` solution in lexicographic order of supports.
pub fn brute_force_solve(instance: &SdInstance) -> Result<Option<SdWitness>, CodingError> {
    brute_force_solve_capped(instance, DEFAULT_ENUMERATION_CAP)
}

pub fn brute_force_solve_capped(
    instance: &SdInstance,
    cap: u128,
) -> Result<Option<SdWitness>, CodingError> {
    let n = instance.n();
    let w = instance.w;
    let count = binomial(n, w);
    if count > cap {
        return Err(CodingError::TooLarge(format!(
            "C({n}, {w}) = {count} supports exceeds the enumeration cap {cap}"
        )));
    }
    let columns: Vec<BitVector> = (0..n).map(|j| instance.h.column(j)).collect();

    let mut support: Vec<usize> = (0..w).collect();
    let mut acc = BitVector::zeros(instance.h.redundancy());
    loop {
        acc.clone_from(&columns[support[0]]);
        for &j in &support[1..] {
            acc.xor_assign(&columns[j])?;
        }
        if acc == instance.s {
            let mut e = BitVector::zeros(n);
            for &j in &support {
                e.set(j, true);
            }
            return Ok(Some(SdWitness { e }));
        }
        // advance to the next combination
        let Some(i) = (0..w).rev().find(|&i| support[i] < n - w + i) else {
            return Ok(None);
        };
        support[i] += 1;
        for j in i + 1..w {
            support[j] = support[j - 1] + 1;
        }
    }
}
