//! Transcripts, the session decision, and report output.
//!
//! Each verifier records its own half of every round: the time it sent its
//! challenge, the raw challenge, and the time and raw bytes of the answer.
//! After the last round the two halves are exchanged and each verifier runs
//! [`evaluate_session`], which is a pure function of the halves.

use serde::{Deserialize, Serialize};

use super::timing::check_timing;
use super::wire::{decode_phase1_challenge, decode_phase1_response, decode_phase2_challenge, decode_phase2_response};
use super::{ProtocolConfig, Role, TransportError};
use crate::coding::{InstanceFile, SdInstance};
use crate::fq::{Field, FieldParams};
use crate::stern::{verifier_check, Challenge, Verdict, VerdictReason};

/// One verifier's record of one round. Byte fields are hex.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalfRound {
    pub round: u32,
    pub tau_ns: Option<i64>,
    pub theta_ns: Option<i64>,
    pub challenge: String,
    pub response: Option<String>,
}

/// Everything one verifier saw during a session.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalfTranscript {
    pub role: Role,
    pub rounds: Vec<HalfRound>,
}

/// A merged round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTranscript {
    pub round: u32,
    pub tau1_ns: Option<i64>,
    pub theta1_ns: Option<i64>,
    pub tau2_ns: Option<i64>,
    pub theta2_ns: Option<i64>,
    /// `B`, hex.
    pub b: String,
    /// `Y`, hex; absent if `P1` never answered.
    pub y: Option<String>,
    pub challenge: u8,
    /// The two openings, hex; absent if `P2` never answered.
    pub az: Option<String>,
    pub timing_ok: bool,
    pub verdict: Verdict,
}

impl RoundTranscript {
    pub fn phase1_ns(&self) -> Option<i64> {
        Some(self.theta1_ns? - self.tau1_ns?)
    }

    pub fn phase2_ns(&self) -> Option<i64> {
        Some(self.theta2_ns? - self.tau2_ns?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub config: ProtocolConfig,
    pub instance: InstanceFile,
    pub rounds: Vec<RoundTranscript>,
    /// Rounds that failed the timing check.
    pub f_observed: u32,
    /// `⌈λR⌉`.
    pub f_allowed: u32,
    pub accepted: bool,
    /// Rounds whose checks passed, including untimely ones.
    pub rounds_passed: u32,
    pub csv: String,
}

impl SessionReport {
    /// Recomputes every verdict and the decision from the stored transcript.
    pub fn recheck(&self) -> Result<SessionReport, TransportError> {
        let instance = self.instance.into_instance()?;
        let v1 = HalfTranscript {
            role: Role::V1,
            rounds: self
                .rounds
                .iter()
                .map(|r| HalfRound {
                    round: r.round,
                    tau_ns: r.tau1_ns,
                    theta_ns: r.theta1_ns,
                    challenge: r.b.clone(),
                    response: r.y.clone(),
                })
                .collect(),
        };
        let v2 = HalfTranscript {
            role: Role::V2,
            rounds: self
                .rounds
                .iter()
                .map(|r| HalfRound {
                    round: r.round,
                    tau_ns: r.tau2_ns,
                    theta_ns: r.theta2_ns,
                    challenge: hex::encode([r.challenge]),
                    response: r.az.clone(),
                })
                .collect(),
        };
        evaluate_session(&self.config, &instance, &v1, &v2)
    }

    /// Fraction of rounds whose checks passed.
    pub fn pass_rate(&self) -> f64 {
        self.rounds_passed as f64 / self.rounds.len().max(1) as f64
    }

    pub fn phase1_histogram_csv(&self, bucket_us: u64) -> String {
        histogram_csv(self.rounds.iter().filter_map(|r| r.phase1_ns()), bucket_us)
    }

    pub fn phase2_histogram_csv(&self, bucket_us: u64) -> String {
        histogram_csv(self.rounds.iter().filter_map(|r| r.phase2_ns()), bucket_us)
    }
}

pub const CSV_HEADER: &str =
    "round,tau1_ns,theta1_ns,tau2_ns,theta2_ns,phase1_us,phase2_us,timing_ok,challenge,verdict_reason";

/// Default histogram bucket width in microseconds.
pub const DEFAULT_BUCKET_US: u64 = 10;

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn rounds_csv(rounds: &[RoundTranscript]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rounds {
        let us = |ns: Option<i64>| ns.map(|v| format!("{:.3}", v as f64 / 1e3));
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.round,
            opt(r.tau1_ns),
            opt(r.theta1_ns),
            opt(r.tau2_ns),
            opt(r.theta2_ns),
            opt(us(r.phase1_ns())),
            opt(us(r.phase2_ns())),
            r.timing_ok,
            r.challenge,
            r.verdict.reason
        ));
    }
    out
}

/// `bucket_start_us,count` over durations in nanoseconds. Empty buckets
/// between the first and last occupied bucket are listed.
pub fn histogram_csv(durations_ns: impl IntoIterator<Item = i64>, bucket_us: u64) -> String {
    let width = bucket_us.max(1) as i64 * 1000;
    let mut counts = std::collections::BTreeMap::<i64, u64>::new();
    for d in durations_ns {
        *counts.entry(d.div_euclid(width)).or_default() += 1;
    }
    let mut out = String::from("bucket_start_us,count\n");
    if let (Some((&lo, _)), Some((&hi, _))) = (counts.first_key_value(), counts.last_key_value()) {
        for b in lo..=hi {
            let c = counts.get(&b).copied().unwrap_or(0);
            out.push_str(&format!("{},{}\n", b * bucket_us.max(1) as i64, c));
        }
    }
    out
}

fn malformed_phase1(slot: usize) -> Verdict {
    Verdict::reject(VerdictReason::BadCommitment(slot as u8 + 1))
}

/// Checks one round from raw bytes. Unparseable answers lose the round as
/// a bad commitment at the first slot that fails to parse.
fn check_round(field: &Field, instance: &SdInstance, b: &str, y: &str, c: Challenge, az: &str) -> Verdict {
    let bytes = |s: &str| hex::decode(s).ok();
    let Some(b) = bytes(b).and_then(|p| decode_phase1_challenge(field, &p).ok()) else {
        return Verdict::reject(VerdictReason::BadCommitment(1));
    };
    let y = match bytes(y).map(|p| decode_phase1_response(field, &p)) {
        Some(Ok(y)) => y,
        Some(Err(slot)) => return malformed_phase1(slot),
        None => return malformed_phase1(0),
    };
    let az = match bytes(az).map(|p| decode_phase2_response(field, c, &p)) {
        Some(Ok(az)) => az,
        Some(Err(index)) => return Verdict::reject(VerdictReason::BadCommitment(index as u8)),
        None => return Verdict::reject(VerdictReason::BadCommitment(c.opened()[0] as u8)),
    };
    verifier_check(instance, &b, &y, c, &az)
}

/// Merges the two halves and decides: accept iff at most `⌈λR⌉` rounds are
/// untimely and every timely round passes its checks. A missing answer makes
/// its round untimely.
pub fn evaluate_session(
    config: &ProtocolConfig,
    instance: &SdInstance,
    v1: &HalfTranscript,
    v2: &HalfTranscript,
) -> Result<SessionReport, TransportError> {
    let field = FieldParams::mersenne_for_code(config.q_exponent, instance.n())?;
    let find = |h: &HalfTranscript, i: u32| h.rounds.iter().find(|r| r.round == i).cloned();
    let mut rounds = Vec::with_capacity(config.rounds as usize);
    let (mut f_observed, mut passed, mut all_timely_pass) = (0u32, 0u32, true);
    for i in 1..=config.rounds {
        let h1 = find(v1, i).unwrap_or_default();
        let h2 = find(v2, i).unwrap_or_default();
        let challenge = hex::decode(&h2.challenge)
            .ok()
            .and_then(|p| decode_phase2_challenge(&p).ok());
        let timing_ok = match (h1.tau_ns, h1.theta_ns, h2.tau_ns, h2.theta_ns) {
            (Some(tau1), Some(theta1), Some(tau2), Some(theta2)) => {
                h1.response.is_some()
                    && h2.response.is_some()
                    && check_timing(theta1, tau2, theta2, tau1, config.d_km)
            }
            _ => false,
        };
        let checked = match (challenge, &h1.response, &h2.response) {
            (Some(c), Some(y), Some(az)) => Some(check_round(&field, instance, &h1.challenge, y, c, az)),
            _ => None,
        };
        if checked.is_some_and(|v| v.accepted) {
            passed += 1;
        }
        let verdict = if timing_ok {
            checked.unwrap_or(Verdict::reject(VerdictReason::BadCommitment(1)))
        } else {
            f_observed += 1;
            Verdict::reject(VerdictReason::TimingViolation)
        };
        if timing_ok && !verdict.accepted {
            all_timely_pass = false;
        }
        rounds.push(RoundTranscript {
            round: i,
            tau1_ns: h1.tau_ns,
            theta1_ns: h1.theta_ns,
            tau2_ns: h2.tau_ns,
            theta2_ns: h2.theta_ns,
            b: h1.challenge,
            y: h1.response,
            challenge: challenge.map_or(0, u8::from),
            az: h2.response,
            timing_ok,
            verdict,
        });
    }
    let f_allowed = config.max_failures();
    Ok(SessionReport {
        config: config.clone(),
        instance: instance.to_file(),
        csv: rounds_csv(&rounds),
        rounds,
        f_observed,
        f_allowed,
        accepted: all_timely_pass && f_observed <= f_allowed,
        rounds_passed: passed,
    })
}
