//! The relativistic `F_Q` string commitment `y = a + z * b`.
//!
//! The prover pair shares `a`, the verifier pair shares `b`. `V1` hands `b`
//! to `P1`, who answers `y` at once; later `P2` opens `(z, a)` to `V2`.

use crate::fq::{FieldElement, FqError};

/// Per-commitment randomness: `a` on the prover side, `b` on the verifier side.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommitmentKeys {
    pub a: FieldElement,
    pub b: FieldElement,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Commitment {
    pub y: FieldElement,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CommitError {
    #[error(transparent)]
    Field(#[from] FqError),
    #[error("both openings reveal the same value")]
    DegenerateOpening,
}

pub fn commit(z: &FieldElement, a: &FieldElement, b: &FieldElement) -> Result<Commitment, FqError> {
    let y = a.checked_add(&z.checked_mul(b)?)?;
    Ok(Commitment { y })
}

/// `true` iff `y = a + z * b`. Elements from another field never verify.
pub fn verify_reveal(c: &Commitment, b: &FieldElement, z: &FieldElement, a: &FieldElement) -> bool {
    commit(z, a, b).is_ok_and(|expected| expected == *c)
}

/// Recovers `b` from two openings of one commitment:
/// `b = (a2 - a1) / (z1 - z2)`.
pub fn extract_b(
    z1: &FieldElement,
    a1: &FieldElement,
    z2: &FieldElement,
    a2: &FieldElement,
) -> Result<FieldElement, CommitError> {
    if z1 == z2 {
        return Err(CommitError::DegenerateOpening);
    }
    Ok(a2.checked_sub(a1)?.checked_div(&z1.checked_sub(z2)?)?)
}
