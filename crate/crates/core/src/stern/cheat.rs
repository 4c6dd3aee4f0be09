//! Classical cheating strategies and the prover-side strategy selector.
//!
//! Without a witness a prover pair can prepare a state that survives any two
//! of the three challenges:
//!
//! - fail 1: `e'` with `H e' = s` of arbitrary weight, by elimination;
//! - fail 2: `e'` of weight `w` with `H e' ≠ s`;
//! - fail 3: `e'` of weight `w`, committing `s' = H t ⊕ H e' ⊕ s`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    draw_commitment_randomness, draw_mask, prover_preprocess, Challenge, ProverRoundState,
    SternError,
};
use crate::coding::{BitVector, SdInstance, SdWitness};
use crate::fq::Field;
use crate::seed::SessionSeed;

/// A state that passes every challenge except (at most) `fail`.
///
/// When `H e' = s` has no solution the fail-1 construction is impossible and
/// the state fails challenge 2 instead; [`ProverRoundState::fails`] reports
/// which one.
pub fn cheating_preprocess(
    instance: &SdInstance,
    fail: Challenge,
    field: &Field,
    seed: &SessionSeed,
    round: u32,
) -> Result<ProverRoundState, SternError> {
    let n = instance.n();
    let (sigma, t) = draw_mask(n, seed, round);
    let a = draw_commitment_randomness(field, seed, round);
    let ht = instance.h.mul_vec(&t)?;
    let mut rng = seed.rng("stern/cheat", round, 0);

    if fail == Challenge::One {
        if let Some(e) = instance.h.solve(&instance.s)? {
            let state = ProverRoundState::assemble(field, sigma, t, ht, &e, a)?;
            return Ok(state.with_fails(Challenge::One));
        }
    }
    let e = BitVector::random_of_weight(n, instance.w, &mut rng);
    let (s_prime, fails) = match fail {
        Challenge::Three => {
            let mut s_prime = ht;
            s_prime.xor_assign(&instance.h.mul_vec(&e)?)?;
            s_prime.xor_assign(&instance.s)?;
            (s_prime, Challenge::Three)
        }
        _ => (ht, Challenge::Two),
    };
    let state = ProverRoundState::assemble(field, sigma, t, s_prime, &e, a)?;
    Ok(state.with_fails(fails))
}

/// How the prover pair behaves across a session.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProverStrategy {
    /// Runs the protocol with the witness.
    Honest,
    /// Cheats every round, always prepared to lose the same challenge.
    CheatFixedFail(Challenge),
    /// Cheats every round; round `r` loses challenge `((r - 1) mod 3) + 1`.
    CheatRotating,
    /// Stays silent in each round with the given probability and cheats in
    /// the others with a uniformly chosen losing challenge.
    AbortRate(f64),
    /// The provers forward `B` and `c` to each other and answer only once
    /// both are known, which costs a relay hop on each side.
    SpookyRelay,
}

impl ProverStrategy {
    /// The abort probability `1 - 2/3` that is optimal against a classical
    /// per-round value of 2/3.
    pub const OPTIMAL_ABORT_RATE: f64 = 1.0 / 3.0;

    pub fn needs_witness(&self) -> bool {
        matches!(self, ProverStrategy::Honest)
    }

    pub fn relays(&self) -> bool {
        matches!(self, ProverStrategy::SpookyRelay)
    }

    /// The state for `round`, or `None` when the provers stay silent.
    ///
    /// `known_challenge` is the phase-2 challenge when the strategy has
    /// learned it in advance (relay strategies only).
    pub fn prepare(
        &self,
        instance: &SdInstance,
        witness: Option<&SdWitness>,
        field: &Field,
        seed: &SessionSeed,
        round: u32,
        known_challenge: Option<Challenge>,
    ) -> Result<Option<ProverRoundState>, SternError> {
        let state = match *self {
            ProverStrategy::Honest => {
                let witness = witness.ok_or(SternError::InvalidWitness)?;
                prover_preprocess(instance, witness, field, seed, round)?
            }
            ProverStrategy::CheatFixedFail(c) => cheating_preprocess(instance, c, field, seed, round)?,
            ProverStrategy::CheatRotating => {
                let c = Challenge::ALL[((round.max(1) - 1) % 3) as usize];
                cheating_preprocess(instance, c, field, seed, round)?
            }
            ProverStrategy::AbortRate(rate) => {
                let mut rng = seed.rng("stern/strategy", round, 0);
                if rng.gen_bool(rate.clamp(0.0, 1.0)) {
                    return Ok(None);
                }
                let c = Challenge::random(&mut rng);
                cheating_preprocess(instance, c, field, seed, round)?
            }
            ProverStrategy::SpookyRelay => match (witness, known_challenge) {
                (Some(w), _) => prover_preprocess(instance, w, field, seed, round)?,
                (None, Some(c)) => cheating_preprocess(instance, c.next(), field, seed, round)?,
                (None, None) => {
                    let c = Challenge::ALL[((round.max(1) - 1) % 3) as usize];
                    cheating_preprocess(instance, c, field, seed, round)?
                }
            },
        };
        Ok(Some(state))
    }
}

impl fmt::Display for ProverStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProverStrategy::Honest => f.write_str("honest"),
            ProverStrategy::CheatFixedFail(c) => write!(f, "cheat_fixed_fail({})", c.index()),
            ProverStrategy::CheatRotating => f.write_str("cheat_rotating"),
            ProverStrategy::AbortRate(r) => write!(f, "abort_rate({r})"),
            ProverStrategy::SpookyRelay => f.write_str("spooky_relay"),
        }
    }
}

impl FromStr for ProverStrategy {
    type Err = String;

    /// Accepts `name`, `name(arg)` and `name:arg`; dashes and underscores
    /// are interchangeable.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().replace('-', "_");
        let (name, arg) = match s.find(['(', ':']) {
            Some(i) => {
                let arg = s[i + 1..].trim_end_matches(')');
                (&s[..i], Some(arg))
            }
            None => (s.as_str(), None),
        };
        let bad = || format!("invalid adversary {s:?}");
        Ok(match (name, arg) {
            ("honest", None) => ProverStrategy::Honest,
            ("cheat_rotating", None) => ProverStrategy::CheatRotating,
            ("spooky_relay" | "spooky", None) => ProverStrategy::SpookyRelay,
            ("cheat_fixed_fail" | "cheat_fixed", Some(a)) => {
                let c: u8 = a.parse().map_err(|_| bad())?;
                ProverStrategy::CheatFixedFail(Challenge::try_from(c).map_err(|e| e.to_string())?)
            }
            ("abort_rate" | "abort", None) => ProverStrategy::AbortRate(Self::OPTIMAL_ABORT_RATE),
            ("abort_rate" | "abort", Some(a)) => {
                let r: f64 = a.parse().map_err(|_| bad())?;
                if !(0.0..=1.0).contains(&r) {
                    return Err(format!("abort rate must lie in [0, 1], got {r}"));
                }
                ProverStrategy::AbortRate(r)
            }
            _ => return Err(bad()),
        })
    }
}

impl Serialize for ProverStrategy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ProverStrategy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}
