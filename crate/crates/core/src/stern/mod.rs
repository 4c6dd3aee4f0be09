//! One round of the relativistic Stern protocol.
//!
//! `P1` and `P2` agree beforehand on `σ`, `t`, and `a1..a3`, and set
//! `s' = H t`, `z1 = (σ, s')`, `z2 = σ(t)`, `z3 = σ(t ⊕ e)`. In phase 1 `V1`
//! sends `b1..b3` and `P1` answers `y_i = a_i + b_i z_i`. In phase 2 `V2`
//! sends a challenge `c` and `P2` opens the two commitments other than `c`.
//!
//! The verifier decodes the opened values (a value outside the encoding range
//! loses the round), checks both openings, then runs the challenge check:
//!
//! | c | check                                   |
//! |---|-----------------------------------------|
//! | 1 | `|z2 ⊕ z3| = w`                         |
//! | 2 | `H σ⁻¹(z3) = s ⊕ s'`                    |
//! | 3 | `H σ⁻¹(z2) = s'`                        |

mod cheat;

pub use cheat::{cheating_preprocess, ProverStrategy};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coding::{BitVector, CodingError, Permutation, SdInstance, SdWitness};
use crate::commit::{self, Commitment};
use crate::fq::{
    decode_bitvec, decode_perm_syndrome, encode_bitvec, encode_perm_syndrome, Field, FieldElement,
    FqError,
};
use crate::seed::SessionSeed;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SternError {
    #[error("witness does not solve the instance")]
    InvalidWitness,
    #[error("invalid challenge {0}, expected 1, 2 or 3")]
    InvalidChallenge(u8),
    #[error(transparent)]
    Coding(#[from] CodingError),
    #[error(transparent)]
    Field(#[from] FqError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Challenge {
    One,
    Two,
    Three,
}

impl Challenge {
    pub const ALL: [Challenge; 3] = [Challenge::One, Challenge::Two, Challenge::Three];

    /// 1, 2 or 3.
    pub fn index(self) -> usize {
        match self {
            Challenge::One => 1,
            Challenge::Two => 2,
            Challenge::Three => 3,
        }
    }

    /// The two commitment indices opened for this challenge, ascending.
    pub fn opened(self) -> [usize; 2] {
        match self {
            Challenge::One => [2, 3],
            Challenge::Two => [1, 3],
            Challenge::Three => [1, 2],
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Challenge {
        Self::ALL[rng.gen_range(0..3)]
    }

    /// The next challenge in the cycle 1 → 2 → 3 → 1.
    pub fn next(self) -> Challenge {
        Self::ALL[self.index() % 3]
    }
}

impl TryFrom<u8> for Challenge {
    type Error = SternError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Challenge::One),
            2 => Ok(Challenge::Two),
            3 => Ok(Challenge::Three),
            other => Err(SternError::InvalidChallenge(other)),
        }
    }
}

impl From<Challenge> for u8 {
    fn from(c: Challenge) -> u8 {
        c.index() as u8
    }
}

/// Everything the prover pair fixes before a round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProverRoundState {
    sigma: Permutation,
    t: BitVector,
    s_prime: BitVector,
    z: [FieldElement; 3],
    a: [FieldElement; 3],
    fails: Option<Challenge>,
}

impl ProverRoundState {
    /// Assembles a state from its parts, computing `z1..z3`; `e` is the
    /// vector hidden in `z3 = σ(t ⊕ e)`.
    pub fn assemble(
        field: &Field,
        sigma: Permutation,
        t: BitVector,
        s_prime: BitVector,
        e: &BitVector,
        a: [FieldElement; 3],
    ) -> Result<Self, SternError> {
        let z1 = encode_perm_syndrome(&sigma, &s_prime, field)?;
        let z2 = encode_bitvec(&sigma.apply(&t)?, field)?;
        let z3 = encode_bitvec(&sigma.apply(&t.xor(e)?)?, field)?;
        Ok(Self {
            sigma,
            t,
            s_prime,
            z: [z1, z2, z3],
            a,
            fails: None,
        })
    }

    /// A state with arbitrary committed values, for adversarial testing.
    pub fn from_raw(z: [FieldElement; 3], a: [FieldElement; 3], n: usize, k: usize) -> Self {
        Self {
            sigma: Permutation::identity(n),
            t: BitVector::zeros(n),
            s_prime: BitVector::zeros(n - k),
            z,
            a,
            fails: None,
        }
    }

    pub fn sigma(&self) -> &Permutation {
        &self.sigma
    }

    pub fn t(&self) -> &BitVector {
        &self.t
    }

    pub fn s_prime(&self) -> &BitVector {
        &self.s_prime
    }

    /// Committed value `z_i`, `i` in 1..=3.
    pub fn z(&self, i: usize) -> &FieldElement {
        &self.z[i - 1]
    }

    /// Commitment randomness `a_i`, `i` in 1..=3.
    pub fn a(&self, i: usize) -> &FieldElement {
        &self.a[i - 1]
    }

    /// The challenge this state is built to lose, for cheating states.
    pub fn fails(&self) -> Option<Challenge> {
        self.fails
    }

    pub(crate) fn with_fails(mut self, c: Challenge) -> Self {
        self.fails = Some(c);
        self
    }
}

/// `B = (b1, b2, b3)`, sent by `V1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Phase1Message {
    pub b: [FieldElement; 3],
}

/// `Y = (y1, y2, y3)`, returned by `P1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Phase1Response {
    pub y: [FieldElement; 3],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Opening {
    pub index: usize,
    pub z: FieldElement,
    pub a: FieldElement,
}

/// The two openings returned by `P2`, smallest index first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Phase2Response {
    pub openings: [Opening; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VerdictReason {
    Ok,
    BadCommitment(u8),
    MappingFailure(u8),
    WeightCheckFailed,
    SyndromeCheck2Failed,
    SyndromeCheck3Failed,
    TimingViolation,
}

impl fmt::Display for VerdictReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerdictReason::Ok => f.write_str("OK"),
            VerdictReason::BadCommitment(i) => write!(f, "BadCommitment({i})"),
            VerdictReason::MappingFailure(i) => write!(f, "MappingFailure({i})"),
            VerdictReason::WeightCheckFailed => f.write_str("WeightCheckFailed"),
            VerdictReason::SyndromeCheck2Failed => f.write_str("SyndromeCheck2Failed"),
            VerdictReason::SyndromeCheck3Failed => f.write_str("SyndromeCheck3Failed"),
            VerdictReason::TimingViolation => f.write_str("TimingViolation"),
        }
    }
}

impl FromStr for VerdictReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let indexed = |prefix: &str| -> Option<u8> {
            s.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?.parse().ok()
        };
        Ok(match s {
            "OK" => VerdictReason::Ok,
            "WeightCheckFailed" => VerdictReason::WeightCheckFailed,
            "SyndromeCheck2Failed" => VerdictReason::SyndromeCheck2Failed,
            "SyndromeCheck3Failed" => VerdictReason::SyndromeCheck3Failed,
            "TimingViolation" => VerdictReason::TimingViolation,
            _ => {
                if let Some(i) = indexed("BadCommitment") {
                    VerdictReason::BadCommitment(i)
                } else if let Some(i) = indexed("MappingFailure") {
                    VerdictReason::MappingFailure(i)
                } else {
                    return Err(format!("unknown verdict reason {s:?}"));
                }
            }
        })
    }
}

impl Serialize for VerdictReason {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VerdictReason {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Outcome of checking one round. `accepted` iff `reason` is `Ok`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Verdict {
    pub accepted: bool,
    pub reason: VerdictReason,
}

impl Verdict {
    pub const ACCEPT: Verdict = Verdict {
        accepted: true,
        reason: VerdictReason::Ok,
    };

    pub fn reject(reason: VerdictReason) -> Verdict {
        debug_assert!(reason != VerdictReason::Ok);
        Verdict {
            accepted: false,
            reason,
        }
    }
}

/// Honest pre-processing: draws `σ`, `t`, `a1..a3` from the prover pair's
/// seed for this round.
pub fn prover_preprocess(
    instance: &SdInstance,
    witness: &SdWitness,
    field: &Field,
    seed: &SessionSeed,
    round: u32,
) -> Result<ProverRoundState, SternError> {
    if !instance.is_solution(&witness.e) {
        return Err(SternError::InvalidWitness);
    }
    let (sigma, t) = draw_mask(instance.n(), seed, round);
    let s_prime = instance.h.mul_vec(&t)?;
    let a = draw_commitment_randomness(field, seed, round);
    ProverRoundState::assemble(field, sigma, t, s_prime, &witness.e, a)
}

pub(crate) fn draw_mask(n: usize, seed: &SessionSeed, round: u32) -> (Permutation, BitVector) {
    let mut rng = seed.rng("stern/mask", round, 0);
    let sigma = Permutation::random(n, &mut rng);
    let t = BitVector::random(n, &mut rng);
    (sigma, t)
}

pub(crate) fn draw_commitment_randomness(
    field: &Field,
    seed: &SessionSeed,
    round: u32,
) -> [FieldElement; 3] {
    [1, 2, 3].map(|i| FieldElement::random(field, &mut seed.rng("stern/a", round, i)))
}

/// `y_i = a_i + b_i z_i`.
pub fn p1_respond(state: &ProverRoundState, msg: &Phase1Message) -> Result<Phase1Response, FqError> {
    let y0 = commit::commit(&state.z[0], &state.a[0], &msg.b[0])?.y;
    let y1 = commit::commit(&state.z[1], &state.a[1], &msg.b[1])?.y;
    let y2 = commit::commit(&state.z[2], &state.a[2], &msg.b[2])?.y;
    Ok(Phase1Response { y: [y0, y1, y2] })
}

/// Opens the two commitments other than `c`.
pub fn p2_respond(state: &ProverRoundState, c: Challenge) -> Phase2Response {
    let open = |i: usize| Opening {
        index: i,
        z: state.z[i - 1].clone(),
        a: state.a[i - 1].clone(),
    };
    let [i, j] = c.opened();
    Phase2Response {
        openings: [open(i), open(j)],
    }
}

/// Values decoded from the openings a challenge needs.
struct Decoded {
    z1: Option<(Permutation, BitVector)>,
    z2: Option<BitVector>,
    z3: Option<BitVector>,
}

fn decode_openings(n: usize, c: Challenge, az: &Phase2Response) -> Result<Decoded, VerdictReason> {
    let find = |i: usize| az.openings.iter().find(|o| o.index == i).map(|o| &o.z);
    let mut out = Decoded {
        z1: None,
        z2: None,
        z3: None,
    };
    // z1 first whenever it is opened
    for i in c.opened() {
        let z = find(i).expect("indices validated");
        let failure = VerdictReason::MappingFailure(i as u8);
        match i {
            1 => out.z1 = Some(decode_perm_syndrome(z, n).map_err(|_| failure)?),
            2 => out.z2 = Some(decode_bitvec(z, n).map_err(|_| failure)?),
            _ => out.z3 = Some(decode_bitvec(z, n).map_err(|_| failure)?),
        }
    }
    Ok(out)
}

/// `H σ⁻¹(v) = target`, where `target` is the decoded length-`n` syndrome
/// slot; its padding bits above `n - k` must be zero.
fn syndrome_matches(
    instance: &SdInstance,
    sigma: &Permutation,
    v: &BitVector,
    target: &BitVector,
) -> bool {
    let m = instance.h.redundancy();
    if target.resized(m).resized(target.len()) != *target {
        return false;
    }
    let Ok(unpermuted) = sigma.inverse().apply(v) else {
        return false;
    };
    instance
        .h
        .mul_vec(&unpermuted)
        .is_ok_and(|hv| hv == target.resized(m))
}

/// Full checking procedure for one round, excluding timing.
pub fn verifier_check(
    instance: &SdInstance,
    b: &Phase1Message,
    y: &Phase1Response,
    c: Challenge,
    az: &Phase2Response,
) -> Verdict {
    for (slot, expected) in c.opened().into_iter().enumerate() {
        if az.openings[slot].index != expected {
            return Verdict::reject(VerdictReason::BadCommitment(expected as u8));
        }
    }
    let decoded = match decode_openings(instance.n(), c, az) {
        Ok(d) => d,
        Err(reason) => return Verdict::reject(reason),
    };
    for o in &az.openings {
        let i = o.index - 1;
        let com = Commitment { y: y.y[i].clone() };
        if !commit::verify_reveal(&com, &b.b[i], &o.z, &o.a) {
            return Verdict::reject(VerdictReason::BadCommitment(o.index as u8));
        }
    }
    let ok = match c {
        Challenge::One => {
            let (z2, z3) = (decoded.z2.unwrap(), decoded.z3.unwrap());
            z2.xor(&z3).is_ok_and(|d| d.weight() == instance.w)
        }
        Challenge::Two => {
            let (sigma, s_prime) = decoded.z1.unwrap();
            let target = instance.s.resized(instance.n()).xor(&s_prime);
            target.is_ok_and(|t| syndrome_matches(instance, &sigma, &decoded.z3.unwrap(), &t))
        }
        Challenge::Three => {
            let (sigma, s_prime) = decoded.z1.unwrap();
            syndrome_matches(instance, &sigma, &decoded.z2.unwrap(), &s_prime)
        }
    };
    match (ok, c) {
        (true, _) => Verdict::ACCEPT,
        (false, Challenge::One) => Verdict::reject(VerdictReason::WeightCheckFailed),
        (false, Challenge::Two) => Verdict::reject(VerdictReason::SyndromeCheck2Failed),
        (false, Challenge::Three) => Verdict::reject(VerdictReason::SyndromeCheck3Failed),
    }
}

/// If the three committed values would pass all three challenges, then
/// `σ⁻¹(z2 ⊕ z3)` solves the instance. Returns that vector when it does.
pub fn extract_witness(instance: &SdInstance, state: &ProverRoundState) -> Option<SdWitness> {
    let n = instance.n();
    let (sigma, _) = decode_perm_syndrome(state.z(1), n).ok()?;
    let z2 = decode_bitvec(state.z(2), n).ok()?;
    let z3 = decode_bitvec(state.z(3), n).ok()?;
    let e = sigma.inverse().apply(&z2.xor(&z3).ok()?).ok()?;
    instance.is_solution(&e).then_some(SdWitness { e })
}
