//! Loss-tolerant relativistic zero-knowledge proofs for Syndrome Decoding.

pub mod coding;
pub mod commit;
pub mod fq;
pub mod seed;
pub mod stern;
pub mod params;
pub mod transport;
pub mod harness;
