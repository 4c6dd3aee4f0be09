//! The four roles as event-driven state machines.
//!
//! An agent never touches a clock or a socket. The runtime calls it with the
//! current time in the role's own (offset-corrected) clock, delivers frames
//! with the timestamp taken as they came off the channel, and reports back
//! the time each outgoing frame left.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use super::session::{evaluate_session, HalfRound, HalfTranscript, SessionReport};
use super::timing::schedule_round;
use super::wire::{
    decode_phase1_challenge, decode_phase2_challenge, decode_sync, encode_phase1_challenge,
    encode_phase1_response, encode_phase2_challenge, encode_phase2_response, encode_sync, Frame,
    MessageType,
};
use super::{ProtocolConfig, Role, TransportError};
use crate::coding::{SdInstance, SdWitness};
use crate::fq::{Field, FieldElement, FieldParams};
use crate::seed::SessionSeed;
use crate::stern::{p1_respond, p2_respond, Challenge, Phase1Message, ProverRoundState, ProverStrategy};

/// Frames an agent wants sent, with their destinations.
pub type Outbox = Vec<(Role, Frame)>;

pub trait Agent {
    fn role(&self) -> Role;

    /// Local time of the next timer, if any. Times in the past fire at once.
    fn next_wakeup(&self) -> Option<i64>;

    fn on_wakeup(&mut self, now: i64, out: &mut Outbox);

    fn on_frame(&mut self, now: i64, from: Role, frame: Frame, out: &mut Outbox);

    /// Called once per outgoing frame with the time it left.
    fn on_sent(&mut self, _to: Role, _frame: &Frame, _at: i64) {}

    fn is_done(&self) -> bool;
}

/// `B_i`, drawn from the verifier pair's seed.
pub fn verifier_phase1_message(field: &Field, seed: &SessionSeed, round: u32) -> Phase1Message {
    Phase1Message {
        b: [0, 1, 2].map(|j| FieldElement::random(field, &mut seed.rng("verifier/b", round, j))),
    }
}

/// `c_i`, drawn from the verifier pair's seed.
pub fn verifier_challenge(seed: &SessionSeed, round: u32) -> Challenge {
    Challenge::random(&mut seed.rng("verifier/c", round, 0))
}

/// Delay between `V1` picking `T1` and the first round.
pub const START_DELAY_NS: i64 = 200_000_000;

/// `V1` or `V2`.
pub struct VerifierAgent {
    role: Role,
    config: ProtocolConfig,
    instance: Arc<SdInstance>,
    challenges: Vec<Vec<u8>>,
    half: HalfTranscript,
    t1: Option<i64>,
    start_delay_ns: i64,
    next_round: u32,
    report_sent: bool,
    peer: Option<HalfTranscript>,
    report: Option<Result<SessionReport, String>>,
}

impl VerifierAgent {
    pub fn new(role: Role, config: &ProtocolConfig, instance: Arc<SdInstance>) -> Result<Self, TransportError> {
        assert!(role.is_verifier());
        config.validate()?;
        let field = FieldParams::mersenne_for_code(config.q_exponent, instance.n())?;
        let seed = config.seeds.verifier_pair;
        let challenges: Vec<Vec<u8>> = (1..=config.rounds)
            .map(|i| match role {
                Role::V1 => encode_phase1_challenge(&verifier_phase1_message(&field, &seed, i)),
                _ => encode_phase2_challenge(verifier_challenge(&seed, i)),
            })
            .collect();
        let half = HalfTranscript {
            role,
            rounds: (1..=config.rounds)
                .zip(&challenges)
                .map(|(i, c)| HalfRound {
                    round: i,
                    challenge: hex::encode(c),
                    ..HalfRound::default()
                })
                .collect(),
        };
        Ok(Self {
            role,
            config: config.clone(),
            instance,
            challenges,
            half,
            t1: config.t1_ns,
            start_delay_ns: START_DELAY_NS,
            next_round: 1,
            report_sent: false,
            peer: None,
            report: None,
        })
    }

    /// Delay used when `V1` has to choose `T1` itself.
    pub fn with_start_delay(mut self, ns: i64) -> Self {
        self.start_delay_ns = ns;
        self
    }

    pub fn t1(&self) -> Option<i64> {
        self.t1
    }

    pub fn half(&self) -> &HalfTranscript {
        &self.half
    }

    /// The merged report once both halves are in.
    pub fn report(&self) -> Option<Result<&SessionReport, &str>> {
        self.report.as_ref().map(|r| r.as_ref().map_err(|e| e.as_str()))
    }

    pub fn into_report(self) -> Option<Result<SessionReport, String>> {
        self.report
    }

    fn round_start(&self, t1: i64, i: u32) -> i64 {
        let (tau1, tau2) = schedule_round(i, &self.config, t1).expect("round in range");
        if self.role == Role::V1 {
            tau1
        } else {
            tau2
        }
    }

    fn report_time(&self, t1: i64) -> i64 {
        self.round_start(t1, self.config.rounds) + self.config.delta_t_ns + self.config.report_grace_ns
    }

    fn try_finish(&mut self) {
        if !self.report_sent || self.report.is_some() {
            return;
        }
        let Some(peer) = &self.peer else { return };
        let (v1, v2) = if self.role == Role::V1 {
            (&self.half, peer)
        } else {
            (peer, &self.half)
        };
        self.report = Some(evaluate_session(&self.config, &self.instance, v1, v2).map_err(|e| e.to_string()));
    }
}

impl Agent for VerifierAgent {
    fn role(&self) -> Role {
        self.role
    }

    fn next_wakeup(&self) -> Option<i64> {
        match self.t1 {
            None if self.role == Role::V1 => Some(i64::MIN),
            None => None,
            Some(t1) if self.next_round <= self.config.rounds => Some(self.round_start(t1, self.next_round)),
            Some(t1) if !self.report_sent => Some(self.report_time(t1)),
            Some(_) => None,
        }
    }

    fn on_wakeup(&mut self, now: i64, out: &mut Outbox) {
        let Some(t1) = self.t1 else {
            if self.role == Role::V1 {
                let t1 = now + self.start_delay_ns;
                self.t1 = Some(t1);
                out.push((Role::V2, Frame::new(MessageType::Sync, 0, encode_sync(Role::V1, t1))));
            }
            return;
        };
        if self.next_round <= self.config.rounds {
            if now >= self.round_start(t1, self.next_round) {
                let i = self.next_round;
                let msg_type = if self.role == Role::V1 {
                    MessageType::Phase1Challenge
                } else {
                    MessageType::Phase2Challenge
                };
                let payload = self.challenges[i as usize - 1].clone();
                out.push((self.role.counterpart(), Frame::new(msg_type, i, payload)));
                self.next_round += 1;
            }
        } else if !self.report_sent && now >= self.report_time(t1) {
            let json = serde_json::to_vec(&self.half).expect("transcript serializes");
            out.push((self.role.partner(), Frame::new(MessageType::Report, 0, json)));
            self.report_sent = true;
            self.try_finish();
        }
    }

    fn on_frame(&mut self, now: i64, from: Role, frame: Frame, _out: &mut Outbox) {
        let expected = if self.role == Role::V1 {
            MessageType::Phase1Response
        } else {
            MessageType::Phase2Response
        };
        match frame.msg_type {
            t if t == expected && from == self.role.counterpart() => {
                let Some(r) = self
                    .half
                    .rounds
                    .get_mut((frame.round as usize).wrapping_sub(1))
                else {
                    return;
                };
                // only the first answer counts, and only after the challenge left
                if r.tau_ns.is_some() && r.theta_ns.is_none() {
                    r.theta_ns = Some(now);
                    r.response = Some(hex::encode(&frame.payload));
                }
            }
            MessageType::Sync if from == Role::V1 && self.role == Role::V2 && self.t1.is_none() => {
                if let Ok((Role::V1, t1)) = decode_sync(&frame.payload) {
                    self.t1 = Some(t1);
                }
            }
            MessageType::Report if from == self.role.partner() && self.peer.is_none() => {
                if let Ok(h) = serde_json::from_slice::<HalfTranscript>(&frame.payload) {
                    if h.role == from {
                        self.peer = Some(h);
                        self.try_finish();
                    }
                }
            }
            _ => {}
        }
    }

    fn on_sent(&mut self, _to: Role, frame: &Frame, at: i64) {
        if matches!(frame.msg_type, MessageType::Phase1Challenge | MessageType::Phase2Challenge) {
            if let Some(r) = self.half.rounds.get_mut(frame.round as usize - 1) {
                r.tau_ns.get_or_insert(at);
            }
        }
    }

    fn is_done(&self) -> bool {
        self.report.is_some()
    }
}

/// `P1` or `P2`.
pub struct ProverAgent {
    role: Role,
    rounds: u32,
    instance: Arc<SdInstance>,
    witness: Option<SdWitness>,
    field: Field,
    seed: SessionSeed,
    strategy: ProverStrategy,
    states: HashMap<u32, Option<ProverRoundState>>,
    /// For relaying pairs: what each side has learned so far.
    seen_b: HashMap<u32, Phase1Message>,
    seen_c: HashMap<u32, Challenge>,
    answered: HashSet<u32>,
    handled_last: bool,
    errors: Vec<String>,
}

impl ProverAgent {
    pub fn new(
        role: Role,
        config: &ProtocolConfig,
        instance: Arc<SdInstance>,
        witness: Option<SdWitness>,
    ) -> Result<Self, TransportError> {
        assert!(!role.is_verifier());
        config.validate()?;
        let field = FieldParams::mersenne_for_code(config.q_exponent, instance.n())?;
        let mut agent = Self {
            role,
            rounds: config.rounds,
            instance,
            witness,
            field,
            seed: config.seeds.prover_pair,
            strategy: config.adversary,
            states: HashMap::new(),
            seen_b: HashMap::new(),
            seen_c: HashMap::new(),
            answered: HashSet::new(),
            handled_last: false,
            errors: Vec::new(),
        };
        if agent.strategy.needs_witness() && agent.witness.is_none() {
            return Err(TransportError::Config("the honest strategy needs a witness".into()));
        }
        if !agent.strategy.relays() {
            for i in 1..=config.rounds {
                let s = agent.prepare(i, None)?;
                agent.states.insert(i, s);
            }
        }
        Ok(agent)
    }

    fn prepare(&self, round: u32, c: Option<Challenge>) -> Result<Option<ProverRoundState>, TransportError> {
        Ok(self
            .strategy
            .prepare(&self.instance, self.witness.as_ref(), &self.field, &self.seed, round, c)?)
    }

    /// Rounds this prover answered.
    pub fn answered(&self) -> usize {
        self.answered.len()
    }

    pub fn errors(&self) -> &[String] {
        &self.errors
    }

    fn answer(&mut self, round: u32, out: &mut Outbox) {
        if self.answered.contains(&round) {
            return;
        }
        let known_c = self.seen_c.get(&round).copied();
        let state = if self.strategy.relays() {
            if known_c.is_none() || !self.seen_b.contains_key(&round) {
                return;
            }
            match self.prepare(round, known_c) {
                Ok(s) => s,
                Err(e) => {
                    self.errors.push(e.to_string());
                    None
                }
            }
        } else {
            self.states.get(&round).cloned().flatten()
        };
        self.answered.insert(round);
        let Some(state) = state else { return };
        let frame = match self.role {
            Role::P1 => {
                let b = &self.seen_b[&round];
                match p1_respond(&state, b) {
                    Ok(y) => Frame::new(MessageType::Phase1Response, round, encode_phase1_response(&y)),
                    Err(e) => {
                        self.errors.push(e.to_string());
                        return;
                    }
                }
            }
            _ => {
                let az = p2_respond(&state, known_c.expect("challenge known"));
                Frame::new(MessageType::Phase2Response, round, encode_phase2_response(&az))
            }
        };
        out.push((self.role.counterpart(), frame));
    }
}

impl Agent for ProverAgent {
    fn role(&self) -> Role {
        self.role
    }

    fn next_wakeup(&self) -> Option<i64> {
        None
    }

    fn on_wakeup(&mut self, _now: i64, _out: &mut Outbox) {}

    fn on_frame(&mut self, _now: i64, from: Role, frame: Frame, out: &mut Outbox) {
        let round = frame.round;
        if round == 0 || round > self.rounds {
            return;
        }
        let from_verifier = from == self.role.counterpart();
        let from_partner = from == self.role.partner();
        match frame.msg_type {
            MessageType::Phase1Challenge if (self.role == Role::P1 && from_verifier) || (self.role == Role::P2 && from_partner) => {
                let Ok(b) = decode_phase1_challenge(&self.field, &frame.payload) else {
                    return;
                };
                self.seen_b.entry(round).or_insert(b);
                if from_verifier && self.strategy.relays() {
                    out.push((self.role.partner(), frame));
                }
            }
            MessageType::Phase2Challenge if (self.role == Role::P2 && from_verifier) || (self.role == Role::P1 && from_partner) => {
                let Ok(c) = decode_phase2_challenge(&frame.payload) else {
                    return;
                };
                self.seen_c.entry(round).or_insert(c);
                if from_verifier && self.strategy.relays() {
                    out.push((self.role.partner(), frame));
                }
            }
            _ => return,
        }
        if from_verifier && round == self.rounds {
            self.handled_last = true;
        }
        self.answer(round, out);
    }

    fn is_done(&self) -> bool {
        self.handled_last && (!self.strategy.relays() || self.answered.contains(&self.rounds))
    }
}

/// One agent of either kind.
pub enum RoleAgent {
    Verifier(VerifierAgent),
    Prover(ProverAgent),
}

impl RoleAgent {
    pub fn new(
        role: Role,
        config: &ProtocolConfig,
        instance: Arc<SdInstance>,
        witness: Option<SdWitness>,
    ) -> Result<Self, TransportError> {
        Ok(if role.is_verifier() {
            RoleAgent::Verifier(VerifierAgent::new(role, config, instance)?)
        } else {
            RoleAgent::Prover(ProverAgent::new(role, config, instance, witness)?)
        })
    }

    fn inner(&self) -> &dyn Agent {
        match self {
            RoleAgent::Verifier(v) => v,
            RoleAgent::Prover(p) => p,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn Agent {
        match self {
            RoleAgent::Verifier(v) => v,
            RoleAgent::Prover(p) => p,
        }
    }
}

impl Agent for RoleAgent {
    fn role(&self) -> Role {
        self.inner().role()
    }

    fn next_wakeup(&self) -> Option<i64> {
        self.inner().next_wakeup()
    }

    fn on_wakeup(&mut self, now: i64, out: &mut Outbox) {
        self.inner_mut().on_wakeup(now, out)
    }

    fn on_frame(&mut self, now: i64, from: Role, frame: Frame, out: &mut Outbox) {
        self.inner_mut().on_frame(now, from, frame, out)
    }

    fn on_sent(&mut self, to: Role, frame: &Frame, at: i64) {
        self.inner_mut().on_sent(to, frame, at)
    }

    fn is_done(&self) -> bool {
        self.inner().is_done()
    }
}
