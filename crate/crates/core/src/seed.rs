//! Shared seeds and domain-separated deterministic randomness.
//!
//! Each pair of agents shares one 32-byte seed out of band. Every random
//! object a round needs is drawn from its own ChaCha20 stream keyed by
//! `SHA-256(tag || seed || round || index)`, so both members of a pair derive
//! identical values without talking.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SessionSeed(#[serde(with = "hex_seed")] pub [u8; 32]);

impl SessionSeed {
    pub fn from_u64(x: u64) -> Self {
        let mut s = [0u8; 32];
        s[..8].copy_from_slice(&x.to_le_bytes());
        Self(s)
    }

    /// A child seed for an independent purpose.
    pub fn derive(&self, tag: &str) -> SessionSeed {
        SessionSeed(self.digest(tag, 0, 0))
    }

    pub fn rng(&self, tag: &str, round: u32, index: u32) -> ChaCha20Rng {
        ChaCha20Rng::from_seed(self.digest(tag, round, index))
    }

    fn digest(&self, tag: &str, round: u32, index: u32) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((tag.len() as u32).to_be_bytes());
        h.update(tag.as_bytes());
        h.update(self.0);
        h.update(round.to_be_bytes());
        h.update(index.to_be_bytes());
        h.finalize().into()
    }
}

impl std::fmt::Debug for SessionSeed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SessionSeed({})", hex::encode(&self.0[..4]))
    }
}

mod hex_seed {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(seed))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(&s).map_err(D::Error::custom)?;
        bytes
            .try_into()
            .map_err(|_| D::Error::custom("seed must be 32 bytes of hex"))
    }
}
