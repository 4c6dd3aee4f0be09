//! GF(2) objects for Syndrome Decoding: packed bit vectors, parity-check
//! matrices, coordinate permutations, and instance generation.

mod bitvec;
mod instance;
mod matrix;
mod perm;

pub use bitvec::BitVector;
pub use instance::{
    binomial, brute_force_solve, brute_force_solve_capped, gen_no_instance, gen_yes_instance,
    InstanceFile, SdInstance, SdWitness, WitnessFile, DEFAULT_ENUMERATION_CAP, MAX_CERTIFIABLE_N,
};
pub use matrix::ParityCheckMatrix;
pub use perm::Permutation;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodingError {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("image table is not a permutation")]
    InvalidPermutation,
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("too large: {0}")]
    TooLarge(String),
    #[error("malformed encoding: {0}")]
    Format(String),
}
