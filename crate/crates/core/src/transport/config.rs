use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TransportError;
use crate::seed::SessionSeed;
use crate::stern::ProverStrategy;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Role {
    P1 = 1,
    P2 = 2,
    V1 = 3,
    V2 = 4,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::P1, Role::P2, Role::V1, Role::V2];

    pub fn is_verifier(self) -> bool {
        matches!(self, Role::V1 | Role::V2)
    }

    /// The other member of the same pair.
    pub fn partner(self) -> Role {
        match self {
            Role::P1 => Role::P2,
            Role::P2 => Role::P1,
            Role::V1 => Role::V2,
            Role::V2 => Role::V1,
        }
    }

    /// The role across the phase this role takes part in.
    pub fn counterpart(self) -> Role {
        match self {
            Role::P1 => Role::V1,
            Role::V1 => Role::P1,
            Role::P2 => Role::V2,
            Role::V2 => Role::P2,
        }
    }
}

impl TryFrom<u8> for Role {
    type Error = TransportError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Role::ALL
            .into_iter()
            .find(|r| *r as u8 == v)
            .ok_or_else(|| TransportError::Malformed(format!("unknown role {v}")))
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::P1 => "p1",
            Role::P2 => "p2",
            Role::V1 => "v1",
            Role::V2 => "v2",
        })
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown role {s:?}, expected p1, p2, v1 or v2"))
    }
}

/// One value per role.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleMap<T> {
    pub p1: T,
    pub p2: T,
    pub v1: T,
    pub v2: T,
}

impl<T> RoleMap<T> {
    pub fn get(&self, r: Role) -> &T {
        match r {
            Role::P1 => &self.p1,
            Role::P2 => &self.p2,
            Role::V1 => &self.v1,
            Role::V2 => &self.v2,
        }
    }

    pub fn get_mut(&mut self, r: Role) -> &mut T {
        match r {
            Role::P1 => &mut self.p1,
            Role::P2 => &mut self.p2,
            Role::V1 => &mut self.v1,
            Role::V2 => &mut self.v2,
        }
    }
}

/// Listening addresses. `V1` dials `p1` and `v2`, `V2` dials `p2`; a
/// relaying `P1` dials `relay`, where `P2` listens.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoints {
    pub p1: String,
    pub p2: String,
    pub v1: String,
    pub v2: String,
    #[serde(default = "default_relay")]
    pub relay: String,
}

fn default_relay() -> String {
    "127.0.0.1:47105".into()
}

impl Default for Endpoints {
    fn default() -> Self {
        Self {
            p1: "127.0.0.1:47101".into(),
            p2: "127.0.0.1:47102".into(),
            v1: "127.0.0.1:47103".into(),
            v2: "127.0.0.1:47104".into(),
            relay: default_relay(),
        }
    }
}

/// Shared randomness, distributed out of band.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub prover_pair: SessionSeed,
    pub verifier_pair: SessionSeed,
    /// Seeds instance generation when no instance file is given.
    #[serde(default = "default_instance_seed")]
    pub instance: SessionSeed,
}

fn default_instance_seed() -> SessionSeed {
    SessionSeed::from_u64(0)
}

impl Seeds {
    /// All three seeds derived from one number.
    pub fn from_u64(x: u64) -> Self {
        let root = SessionSeed::from_u64(x);
        Self {
            prover_pair: root.derive("prover_pair"),
            verifier_pair: root.derive("verifier_pair"),
            instance: root.derive("instance"),
        }
    }
}

impl Default for Seeds {
    fn default() -> Self {
        Self::from_u64(1)
    }
}

/// Parameters shared by all four roles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub n: usize,
    pub k: usize,
    pub w: usize,
    pub q_exponent: u32,
    #[serde(rename = "R")]
    pub rounds: u32,
    pub lambda: f64,
    #[serde(rename = "D_km")]
    pub d_km: f64,
    #[serde(rename = "delta_T_ns")]
    pub delta_t_ns: i64,
    #[serde(rename = "T_shift_ns")]
    pub t_shift_ns: i64,
    /// Session start; `V1` picks one and announces it when absent.
    #[serde(rename = "T1_ns", default)]
    pub t1_ns: Option<i64>,
    /// Subtracted from each role's raw clock reading.
    #[serde(default)]
    pub clock_offset_ns: RoleMap<i64>,
    /// Wait after a verifier's last round before transcripts are merged.
    #[serde(default = "default_grace")]
    pub report_grace_ns: i64,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub endpoints: Endpoints,
    #[serde(default = "default_adversary")]
    pub adversary: ProverStrategy,
}

fn default_grace() -> i64 {
    50_000_000
}

fn default_adversary() -> ProverStrategy {
    ProverStrategy::Honest
}

impl Default for ProtocolConfig {
    /// The full-size parameter set with a 400 km baseline.
    fn default() -> Self {
        Self {
            n: 1704,
            k: 769,
            w: 216,
            q_exponent: crate::fq::PROTOCOL_EXPONENT,
            rounds: 340,
            lambda: 22.0 / 340.0,
            d_km: 400.0,
            delta_t_ns: 2_000_000,
            t_shift_ns: 500_000,
            t1_ns: None,
            clock_offset_ns: RoleMap::default(),
            report_grace_ns: default_grace(),
            seeds: Seeds::default(),
            endpoints: Endpoints::default(),
            adversary: default_adversary(),
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), TransportError> {
        let bad = |m: String| Err(TransportError::Config(m));
        if !(0.0..1.0).contains(&self.lambda) {
            return bad(format!("lambda must lie in [0, 1), got {}", self.lambda));
        }
        if self.t_shift_ns < 0 || self.delta_t_ns <= self.t_shift_ns {
            return bad(format!(
                "need delta_T > T_shift >= 0, got {} and {}",
                self.delta_t_ns, self.t_shift_ns
            ));
        }
        if self.rounds == 0 {
            return bad("need at least one round".into());
        }
        if self.d_km.is_nan() || self.d_km <= 0.0 {
            return bad(format!("distance must be positive, got {}", self.d_km));
        }
        if self.report_grace_ns < 0 {
            return bad("report grace must be non-negative".into());
        }
        if self.k == 0 || self.k >= self.n || self.w == 0 || self.w > self.n {
            return bad(format!("invalid code parameters n={}, k={}, w={}", self.n, self.k, self.w));
        }
        Ok(())
    }

    /// `⌈λR⌉`, robust to `λ` being a rounded ratio such as `22/340`.
    pub fn max_failures(&self) -> u32 {
        let x = self.lambda * self.rounds as f64;
        (x - 1e-9 * x.max(1.0)).ceil().max(0.0) as u32
    }
}
